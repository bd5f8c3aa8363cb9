#include "ocsim/distribution.hpp"

#include "ocsim/csv.hpp"
#include "ocsim/types.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace ocsim {

namespace {

constexpr double kMassTolerance = 1e-9;

struct Kind {
    DistributionKind kind;
    std::string_view name;
};
constexpr std::array<Kind, 4> kKinds{{{DistributionKind::Categorical, "categorical"},
                                      {DistributionKind::PiecewiseByAge, "piecewise-by-age"},
                                      {DistributionKind::ScalarRate, "scalar-rate"},
                                      {DistributionKind::Conditional, "conditional"}}};

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

std::string_view to_string(DistributionKind k) noexcept {
    for (const auto& entry : kKinds) {
        if (entry.kind == k) return entry.name;
    }
    return "?";
}

DistributionKind parse_distribution_kind(std::string_view s) {
    for (const auto& entry : kKinds) {
        if (entry.name == s) return entry.kind;
    }
    throw ConfigError("kind", fmt::format("unknown distribution kind '{}' (expected categorical, piecewise-by-age, "
                                          "scalar-rate or conditional)",
                                          s));
}

void DistributionTable::validate() const {
    auto fail = [&](const std::string& msg) { throw ConfigError(name, msg); };
    if (bins.empty()) fail("table has no bins");
    for (const auto& b : bins) {
        if (!std::isfinite(b.mass) || b.mass < 0.0) fail(fmt::format("bin '{}' has invalid mass {}", b.label, b.mass));
        if (!(b.lower <= b.upper)) fail(fmt::format("bin '{}' has lower bound above upper bound", b.label));
    }

    auto require_unit_sum = [&](double sum, std::string_view what) {
        if (std::abs(sum - 1.0) > kMassTolerance)
            fail(fmt::format("probability masses{} sum to {} instead of 1", what, sum));
    };

    switch (kind) {
    case DistributionKind::Categorical: {
        double sum = 0.0;
        for (const auto& b : bins) sum += b.mass;
        require_unit_sum(sum, "");
        break;
    }
    case DistributionKind::PiecewiseByAge: {
        double sum = 0.0;
        std::map<std::string, std::vector<const DistributionBin*>> by_label;
        for (const auto& b : bins) {
            sum += b.mass;
            by_label[b.label].push_back(&b);
        }
        require_unit_sum(sum, "");
        for (auto& [label, list] : by_label) {
            std::sort(list.begin(), list.end(), [](auto* x, auto* y) { return x->lower < y->lower; });
            if (list.front()->lower != 0.0) fail(fmt::format("age ranges of '{}' do not start at 0", label));
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (!(list[i]->lower < list[i]->upper)) fail(fmt::format("empty age range in '{}'", label));
                if (i > 0 && list[i]->lower != list[i - 1]->upper)
                    fail(fmt::format("age ranges of '{}' overlap or leave a gap at {}", label, list[i - 1]->upper));
            }
        }
        break;
    }
    case DistributionKind::ScalarRate:
        for (const auto& b : bins) {
            if (b.mass > 1.0) fail(fmt::format("rate of bin '{}' exceeds 1", b.label));
        }
        break;
    case DistributionKind::Conditional: {
        std::map<std::pair<double, double>, double> sums;
        for (const auto& b : bins) sums[{b.lower, b.upper}] += b.mass;
        for (const auto& [range, sum] : sums) {
            require_unit_sum(sum, fmt::format(" for covariate range [{}, {})", range.first, range.second));
        }
        break;
    }
    }
}

std::size_t DistributionTable::sample_bin(Rng& rng) const {
    double total = 0.0;
    for (const auto& b : bins) total += b.mass;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        if (bins[i].mass <= 0.0) continue;
        acc += bins[i].mass;
        last_positive = i;
        if (u < acc) return i;
    }
    return last_positive;
}

std::int64_t DistributionTable::sample_integer(Rng& rng) const {
    const auto& b = bins[sample_bin(rng)];
    const auto lo = static_cast<std::int64_t>(std::ceil(b.lower));
    const auto hi = std::max(lo, static_cast<std::int64_t>(std::floor(b.upper)));
    return rng.between(lo, hi);
}

const std::string& DistributionTable::sample_conditional(double covariate, Rng& rng) const {
    // Pick the covariate range containing the value, clamping to the outermost ranges.
    std::pair<double, double> chosen{0.0, 0.0};
    bool found = false;
    double min_lower = INFINITY, max_upper = -INFINITY;
    std::pair<double, double> lowest, highest;
    for (const auto& b : bins) {
        if (b.lower <= covariate && covariate < b.upper) {
            chosen = {b.lower, b.upper};
            found = true;
            break;
        }
        if (b.lower < min_lower) {
            min_lower = b.lower;
            lowest = {b.lower, b.upper};
        }
        if (b.upper > max_upper) {
            max_upper = b.upper;
            highest = {b.lower, b.upper};
        }
    }
    if (!found) chosen = covariate < min_lower ? lowest : highest;

    double total = 0.0;
    for (const auto& b : bins) {
        if (b.lower == chosen.first && b.upper == chosen.second) total += b.mass;
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    const DistributionBin* last = nullptr;
    for (const auto& b : bins) {
        if (b.lower != chosen.first || b.upper != chosen.second || b.mass <= 0.0) continue;
        acc += b.mass;
        last = &b;
        if (u < acc) return b.label;
    }
    if (last == nullptr) throw ConfigError(name, "conditional range has no positive mass");
    return last->label;
}

double DistributionTable::rate(std::string_view label, double age_years) const {
    for (const auto& b : bins) {
        if ((b.label == label || b.label == "*") && b.lower <= age_years && age_years < b.upper) return b.mass;
    }
    return 0.0;
}

double DistributionTable::mode_lower() const {
    const auto it = std::max_element(bins.begin(), bins.end(),
                                     [](const auto& a, const auto& b) { return a.mass < b.mass; });
    return it == bins.end() ? 0.0 : it->lower;
}

DistributionTable read_distribution_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string(), "cannot open distribution file");
    DistributionTable table;
    table.name = file.stem().string();
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        const auto text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            const auto body = trim(std::string_view(text).substr(1));
            if (body.starts_with("kind:")) table.kind = parse_distribution_kind(trim(body.substr(5)));
            if (body.starts_with("description:")) table.description = trim(body.substr(12));
            continue;
        }
        const auto fields = split_csv_line(text);
        if (!header_seen) {
            if (fields.size() != 4 || fields[0] != "bin_label" || fields[3] != "mass")
                throw ConfigError(table.name, "expected header 'bin_label,lower_bound,upper_bound,mass'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 4) throw ConfigError(table.name, fmt::format("malformed row '{}'", text));
        try {
            table.bins.push_back({fields[0], std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3])});
        } catch (const std::logic_error&) {
            throw ConfigError(table.name, fmt::format("non-numeric value in row '{}'", text));
        }
    }
    return table;
}

DistributionSet load_distribution_bundle(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError(dir.string(), "distribution bundle is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    DistributionSet set;
    for (const auto& f : files) {
        auto table = read_distribution_csv(f);
        set.emplace(table.name, std::move(table));
    }
    return set;
}

std::string to_csv(const DistributionTable& table) {
    std::string out = fmt::format("# kind: {}\n", to_string(table.kind));
    if (!table.description.empty()) out += fmt::format("# description: {}\n", table.description);
    out += "bin_label,lower_bound,upper_bound,mass\n";
    for (const auto& b : table.bins) out += fmt::format("{},{},{},{}\n", b.label, b.lower, b.upper, b.mass);
    return out;
}

void write_distribution_bundle(const DistributionSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, table] : set) {
        std::ofstream out(dir / (name + ".csv"));
        out << to_csv(table);
    }
}

} // namespace ocsim
