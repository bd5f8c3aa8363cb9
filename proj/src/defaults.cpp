#include "ocsim/scenario.hpp"

#include <cmath>
#include <numeric>

namespace ocsim {

namespace {

DistributionTable make(std::string_view name, DistributionKind kind, std::string description,
                       std::vector<DistributionBin> bins) {
    return {std::string(name), kind, std::move(description), std::move(bins)};
}

// Scales the masses of `bins` so they sum to exactly one.
void normalize(std::vector<DistributionBin>& bins) {
    const double total = std::accumulate(bins.begin(), bins.end(), 0.0,
                                         [](double s, const DistributionBin& b) { return s + b.mass; });
    for (auto& b : bins) b.mass /= total;
}

std::vector<DistributionBin> age_by_gender() {
    // Relative weight of each five-year band, 0-4 through 95-99.
    constexpr std::array<double, 20> shape{4.6, 4.9, 5.1, 5.3, 5.6, 5.8, 6.0, 6.4, 7.0, 7.4,
                                           7.5, 7.2, 6.6, 6.0, 5.4, 4.4, 3.3, 2.0, 0.9, 0.3};
    std::vector<DistributionBin> bins;
    for (const auto& [label, share] : {std::pair{"F", 0.52}, std::pair{"M", 0.48}}) {
        const bool male = label[0] == 'M';
        double total = 0.0;
        std::array<double, 20> w{};
        for (std::size_t i = 0; i < shape.size(); ++i) {
            w[i] = shape[i] * (male && i >= 14 ? std::pow(0.85, double(i - 13)) : 1.0);
            total += w[i];
        }
        for (std::size_t i = 0; i < shape.size(); ++i)
            bins.push_back({label, 5.0 * double(i), 5.0 * double(i + 1), share * w[i] / total});
    }
    normalize(bins);
    return bins;
}

std::vector<DistributionBin> mortality() {
    std::vector<DistributionBin> bins;
    for (const auto& [label, scale] : {std::pair{"F", 1.0}, std::pair{"M", 1.45}}) {
        bins.push_back({label, 0, 1, 0.003 * scale});
        bins.push_back({label, 1, 5, 0.0002 * scale});
        for (int lo = 5; lo < 100; lo += 5) {
            const double mid = lo + 2.5;
            bins.push_back({label, double(lo), double(lo + 5), std::min(1.0, 2.2e-5 * std::exp(0.094 * mid) * scale)});
        }
        bins.push_back({label, 100, 200, 1.0});
    }
    return bins;
}

std::vector<DistributionBin> household_types() {
    struct Row {
        double lo, hi;
        std::array<double, 5> p;
    };
    constexpr std::array<std::string_view, 5> types{"single", "couple", "couple_children", "single_parent", "extended"};
    const std::array<Row, 4> rows{{
        {0, 35, {0.35, 0.20, 0.35, 0.07, 0.03}},
        {35, 55, {0.15, 0.12, 0.55, 0.12, 0.06}},
        {55, 75, {0.25, 0.40, 0.20, 0.08, 0.07}},
        {75, 200, {0.50, 0.38, 0.03, 0.04, 0.05}},
    }};
    std::vector<DistributionBin> bins;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < types.size(); ++i) bins.push_back({std::string(types[i]), r.lo, r.hi, r.p[i]});
    return bins;
}

std::vector<DistributionBin> education_by_age() {
    struct Row {
        double lo, hi;
        std::array<double, 5> p;
    };
    constexpr std::array<std::string_view, 5> levels{"none", "primary", "secondary", "high_school", "higher"};
    const std::array<Row, 4> rows{{
        {19, 35, {0.01, 0.04, 0.35, 0.42, 0.18}},
        {35, 55, {0.02, 0.10, 0.38, 0.36, 0.14}},
        {55, 75, {0.05, 0.25, 0.35, 0.25, 0.10}},
        {75, 200, {0.12, 0.40, 0.25, 0.16, 0.07}},
    }};
    std::vector<DistributionBin> bins;
    for (const auto& r : rows)
        for (std::size_t i = 0; i < levels.size(); ++i) bins.push_back({std::string(levels[i]), r.lo, r.hi, r.p[i]});
    return bins;
}

std::vector<DistributionBin> wealth_by_education() {
    const std::array<std::array<double, 5>, 5> rows{{
        {0.45, 0.30, 0.15, 0.08, 0.02},
        {0.35, 0.32, 0.20, 0.10, 0.03},
        {0.20, 0.30, 0.28, 0.16, 0.06},
        {0.10, 0.22, 0.33, 0.24, 0.11},
        {0.05, 0.12, 0.28, 0.32, 0.23},
    }};
    std::vector<DistributionBin> bins;
    for (std::size_t e = 0; e < rows.size(); ++e)
        for (std::size_t w = 0; w < 5; ++w) bins.push_back({std::to_string(w + 1), double(e), double(e + 1), rows[e][w]});
    return bins;
}

} // namespace

DistributionSet default_distributions() {
    using K = DistributionKind;
    DistributionSet s;
    auto add = [&](DistributionTable t) { s.emplace(t.name, std::move(t)); };

    add(make(tables::kAgeByGender, K::PiecewiseByAge, "age by gender, five-year bands", age_by_gender()));
    add(make(tables::kHouseholdHeadAge, K::PiecewiseByAge, "age of household heads",
             {{"*", 0, 18, 0.0},
              {"*", 18, 25, 0.05},
              {"*", 25, 35, 0.14},
              {"*", 35, 45, 0.20},
              {"*", 45, 55, 0.21},
              {"*", 55, 65, 0.17},
              {"*", 65, 75, 0.13},
              {"*", 75, 90, 0.10}}));
    add(make(tables::kHouseholdTypeByHeadAge, K::Conditional, "household type by head age", household_types()));
    add(make(tables::kChildrenPerFamily, K::Categorical, "children in families with children",
             {{"1", 1, 1, 0.45}, {"2", 2, 2, 0.40}, {"3", 3, 3, 0.12}, {"4", 4, 4, 0.03}}));
    add(make(tables::kEducationByAge, K::Conditional, "highest education of adults by age", education_by_age()));
    add(make(tables::kWealthByEducation, K::Conditional, "wealth quintile by education level", wealth_by_education()));
    add(make(tables::kEmployerSize, K::Categorical, "employees per firm",
             {{"1-4", 1, 4, 0.35},
              {"5-9", 5, 9, 0.25},
              {"10-19", 10, 19, 0.20},
              {"20-49", 20, 49, 0.12},
              {"50-99", 50, 99, 0.05},
              {"100-250", 100, 250, 0.03}}));

    add(make(tables::kFertilityByAge, K::ScalarRate, "annual birth probability of partnered women",
             {{"F", 15, 20, 0.02},
              {"F", 20, 25, 0.08},
              {"F", 25, 30, 0.13},
              {"F", 30, 35, 0.14},
              {"F", 35, 40, 0.08},
              {"F", 40, 45, 0.02},
              {"F", 45, 50, 0.003}}));
    add(make(tables::kMortalityByAgeGender, K::ScalarRate, "annual death probability", mortality()));
    add(make(tables::kPartnershipByAge, K::ScalarRate, "annual probability that a single adult seeks a partner",
             {{"*", 18, 25, 0.05}, {"*", 25, 35, 0.15}, {"*", 35, 50, 0.08}, {"*", 50, 70, 0.03}}));

    add(make(tables::kCoOffendingSize, K::Categorical, "offenders per crime",
             {{"1", 1, 1, 0.70}, {"2", 2, 2, 0.20}, {"3", 3, 3, 0.07}, {"4", 4, 4, 0.03}}));
    add(make(tables::kPunishment, K::ScalarRate, "sanction probability per offender and crime",
             {{"*", 0, 14, 0.0}, {"*", 14, 18, 0.10}, {"*", 18, 200, 0.20}}));
    add(make(tables::kSentenceMonths, K::Categorical, "prison sentence in months",
             {{"1-6", 1, 6, 0.35}, {"7-12", 7, 12, 0.25}, {"13-24", 13, 24, 0.20}, {"25-60", 25, 60, 0.15},
              {"61-120", 61, 120, 0.05}}));

    add(make(tables::kOcSeedGender, K::Categorical, "gender of initial OC members", {{"F", 0, 0, 0.1}, {"M", 0, 0, 0.9}}));
    add(make(tables::kOcSeedAge, K::PiecewiseByAge, "age of initial OC members",
             {{"*", 0, 18, 0.0}, {"*", 18, 30, 0.25}, {"*", 30, 45, 0.35}, {"*", 45, 60, 0.25}, {"*", 60, 80, 0.15}}));
    return s;
}

ScenarioConfig default_scenario() {
    ScenarioConfig c;
    c.distributions = default_distributions();
    c.population.oc_seed.member_count = 50;
    c.population.oc_seed.topology = OcTopology::Tree;
    c.population.oc_seed.branching_factor = 3;
    c.sync();
    return c;
}

} // namespace ocsim
