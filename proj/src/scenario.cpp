#include "ocsim/scenario.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>

namespace ocsim {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 15> kRequiredTables{
    tables::kAgeByGender,       tables::kHouseholdHeadAge,      tables::kHouseholdTypeByHeadAge,
    tables::kChildrenPerFamily, tables::kEducationByAge,        tables::kWealthByEducation,
    tables::kEmployerSize,      tables::kFertilityByAge,        tables::kMortalityByAgeGender,
    tables::kPartnershipByAge,  tables::kCoOffendingSize,       tables::kPunishment,
    tables::kSentenceMonths,    tables::kOcSeedGender,          tables::kOcSeedAge,
};

std::string join_path(const std::string& base, std::string_view key) {
    return base.empty() ? std::string(key) : fmt::format("{}.{}", base, key);
}

std::string_view type_name(const json& j) { return j.type_name(); }

// Object reader that tracks consumed keys so leftovers can be reported as unknown fields.
class Fields {
public:
    Fields(const json& j, std::string path) : j_{j}, path_{std::move(path)} {
        if (!j.is_object())
            throw ConfigError(path_, fmt::format("expected an object, got {}", type_name(j)));
    }

    const json* find(std::string_view key) {
        seen_.insert(std::string(key));
        auto it = j_.find(std::string(key));
        return it == j_.end() ? nullptr : &*it;
    }

    std::string path(std::string_view key) const { return join_path(path_, key); }

    void number(std::string_view key, double& out) {
        if (const auto* v = find(key)) {
            if (!v->is_number()) throw ConfigError(path(key), fmt::format("expected a number, got {}", type_name(*v)));
            out = v->get<double>();
        }
    }

    template <typename Int>
    void integer(std::string_view key, Int& out) {
        if (const auto* v = find(key)) {
            if (!v->is_number_integer())
                throw ConfigError(path(key), fmt::format("expected an integer, got {}", type_name(*v)));
            if constexpr (std::is_unsigned_v<Int>) {
                if (v->is_number_unsigned()) {
                    out = v->get<Int>();
                } else {
                    const auto x = v->get<std::int64_t>();
                    if (x < 0) throw ConfigError(path(key), "must be non-negative");
                    out = static_cast<Int>(x);
                }
            } else {
                out = static_cast<Int>(v->get<std::int64_t>());
            }
        }
    }

    void string(std::string_view key, std::string& out) {
        if (const auto* v = find(key)) {
            if (!v->is_string()) throw ConfigError(path(key), fmt::format("expected a string, got {}", type_name(*v)));
            out = v->get<std::string>();
        }
    }

    template <typename Parse, typename T>
    void parsed(std::string_view key, T& out, Parse parse) {
        const auto* v = find(key);
        if (!v) return;
        if (!v->is_string()) throw ConfigError(path(key), fmt::format("expected a string, got {}", type_name(*v)));
        try {
            out = parse(v->get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(path(key), e.message());
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

DistributionTable* find_table(DistributionSet& set, std::string_view name) {
    auto it = set.find(std::string(name));
    return it == set.end() ? nullptr : &it->second;
}

PolicySpec policy_from_json(const json& j, const std::string& path) {
    Fields f{j, path};
    PolicySpec p;
    if (!f.find("kind")) throw ConfigError(f.path("kind"), "required");
    f.parsed("kind", p.kind, parse_policy_kind);
    f.integer("start_tick", p.start_tick);
    f.integer("end_tick", p.end_tick);
    f.number("target_share", p.target_share);
    if (const auto* cs = f.find("components")) {
        if (!cs->is_array()) throw ConfigError(f.path("components"), "expected an array of component names");
        for (std::size_t i = 0; i < cs->size(); ++i) {
            const auto cpath = fmt::format("{}[{}]", f.path("components"), i);
            if (!(*cs)[i].is_string()) throw ConfigError(cpath, "expected a string");
            try {
                p.components.insert(parse_policy_component((*cs)[i].get<std::string>()));
            } catch (const ConfigError& e) {
                throw ConfigError(cpath, e.message());
            }
        }
    }
    f.number("scrutiny_factor", p.scrutiny_factor);
    f.number("repression_multiplier", p.repression_multiplier);
    f.number("tie_weakening_factor", p.tie_weakening_factor);
    f.parsed("le_target", p.le_target, parse_le_target_mode);
    f.parsed("primary_ranking", p.primary_ranking, parse_primary_ranking);
    f.integer("friends_to_add", p.friends_to_add);
    f.integer("ties_to_remove", p.ties_to_remove);
    f.finish();
    return p;
}

BaselineTable baseline_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != kClassCount)
        throw ConfigError(path, fmt::format("expected an array of {} rows", kClassCount));
    auto rows = BaselineTable::palermo().rows();
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto rpath = fmt::format("{}[{}]", path, i);
        Fields f{j[i], rpath};
        std::string label;
        f.string("class", label);
        std::size_t idx = kClassCount;
        for (std::size_t k = 0; k < kClassCount; ++k)
            if (class_label(k) == label) idx = k;
        if (idx == kClassCount) throw ConfigError(rpath + ".class", fmt::format("unknown class '{}'", label));
        if (!seen.insert(idx).second) throw ConfigError(rpath + ".class", fmt::format("duplicate class '{}'", label));
        f.number("probability", rows[idx].probability);
        f.number("odds_ratio", rows[idx].odds_ratio);
        f.finish();
    }
    return BaselineTable{rows};
}

RiskFactorSet risk_factors_from_json(const json& j, const std::string& path) {
    Fields f{j, path};
    auto specs = RiskFactorSet::standard().specs();
    for (auto& s : specs) f.number(to_string(s.factor), s.odds_ratio);
    f.finish();
    return RiskFactorSet{specs};
}

} // namespace

json to_json(const DistributionTable& t) {
    json bins = json::array();
    for (const auto& b : t.bins) bins.push_back({{"label", b.label}, {"lower", b.lower}, {"upper", b.upper}, {"mass", b.mass}});
    return {{"kind", to_string(t.kind)}, {"description", t.description}, {"bins", std::move(bins)}};
}

DistributionTable distribution_from_json(const json& j, const std::string& name, const std::string& path) {
    Fields f{j, path};
    DistributionTable t;
    t.name = name;
    if (!f.find("kind")) throw ConfigError(f.path("kind"), "required");
    f.parsed("kind", t.kind, parse_distribution_kind);
    f.string("description", t.description);
    const auto* bins = f.find("bins");
    if (!bins || !bins->is_array()) throw ConfigError(f.path("bins"), "expected an array of bins");
    for (std::size_t i = 0; i < bins->size(); ++i) {
        Fields b{(*bins)[i], fmt::format("{}[{}]", f.path("bins"), i)};
        DistributionBin bin;
        b.string("label", bin.label);
        b.number("lower", bin.lower);
        b.number("upper", bin.upper);
        b.number("mass", bin.mass);
        b.finish();
        t.bins.push_back(std::move(bin));
    }
    f.finish();
    return t;
}

json to_json(const PolicySpec& p) {
    json components = json::array();
    for (auto c : p.components.list()) components.push_back(to_string(c));
    return {{"kind", to_string(p.kind)},
            {"start_tick", p.start_tick},
            {"end_tick", p.end_tick},
            {"target_share", p.target_share},
            {"components", std::move(components)},
            {"scrutiny_factor", p.scrutiny_factor},
            {"repression_multiplier", p.repression_multiplier},
            {"tie_weakening_factor", p.tie_weakening_factor},
            {"le_target", to_string(p.le_target)},
            {"primary_ranking", to_string(p.primary_ranking)},
            {"friends_to_add", p.friends_to_add},
            {"ties_to_remove", p.ties_to_remove}};
}

void ScenarioConfig::sync() {
    population.distributions = distributions;
    population.random_seed = seed;
    if (auto* t = find_table(distributions, tables::kOcSeedGender)) population.oc_seed.gender_distribution = *t;
    if (auto* t = find_table(distributions, tables::kOcSeedAge)) population.oc_seed.age_distribution = *t;
    if (auto* t = find_table(distributions, tables::kFertilityByAge)) lifecycle.fertility_by_age = *t;
    if (auto* t = find_table(distributions, tables::kMortalityByAgeGender)) lifecycle.mortality_by_age_gender = *t;
    if (auto* t = find_table(distributions, tables::kPartnershipByAge)) lifecycle.partnership_by_age = *t;
    if (auto* t = find_table(distributions, tables::kCoOffendingSize)) crime.co_offending_size = *t;
    if (auto* t = find_table(distributions, tables::kPunishment)) crime.punishment = *t;
    if (auto* t = find_table(distributions, tables::kSentenceMonths)) crime.sentence_months = *t;
    crime.h = h;
    crime.rho = rho;
    crime.ticks_per_year = ticks_per_year;
    crime.propensity_threshold = population.propensity.threshold();
}

void ScenarioConfig::validate() const {
    if (horizon_ticks < 12) throw ConfigError("horizon_ticks", "must be at least 12");
    if (ticks_per_year != kMonthsPerYear) throw ConfigError("ticks_per_year", "only monthly ticks (12) are supported");
    if (h < 1 || h > 3) throw ConfigError("h", "must be in [1, 3]");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must be in [0, 1]");
    for (auto name : kRequiredTables)
        if (!distributions.count(std::string(name)))
            throw ConfigError(join_path("distributions", name), "required table is missing");
    for (const auto& [name, t] : distributions) {
        try {
            t.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(join_path("distributions", name), e.message());
        }
    }
    auto nested = [&](const ConfigError& e, std::string_view prefix) {
        if (distributions.count(e.path())) return ConfigError(join_path("distributions", e.path()), e.message());
        return prefix.empty() ? e : e.nested(prefix);
    };
    try {
        population.validate();
    } catch (const ConfigError& e) {
        throw nested(e, "population");
    }
    try {
        lifecycle.validate();
    } catch (const ConfigError& e) {
        throw nested(e, "lifecycle");
    }
    try {
        crime.validate();
    } catch (const ConfigError& e) {
        if (e.path() == "crime.co_offending_size")
            throw ConfigError(join_path("distributions", tables::kCoOffendingSize), e.message());
        throw nested(e, "");
    }
    for (std::size_t i = 0; i < policies.size(); ++i) policies[i].validate(fmt::format("policies[{}]", i));
}

ScenarioConfig scenario_from_json(const json& doc, const std::filesystem::path& base_dir) {
    Fields f{doc, ""};
    ScenarioConfig c;
    int version = 0;
    f.integer("schema_version", version);
    if (version != kScenarioSchemaVersion)
        throw ConfigError("schema_version", fmt::format("unsupported schema version {} (expected {})", version,
                                                        kScenarioSchemaVersion));
    f.string("name", c.name);
    f.integer("seed", c.seed);
    f.integer("horizon_ticks", c.horizon_ticks);
    f.integer("ticks_per_year", c.ticks_per_year);
    f.integer("h", c.h);
    f.number("rho", c.rho);

    if (const auto* pj = f.find("population")) {
        Fields p{*pj, "population"};
        p.integer("population_size", c.population.population_size);
        p.number("unemployment_rate", c.population.unemployment_rate);
        p.number("school_attendance", c.population.school_attendance);
        p.number("facilitator_share", c.population.facilitator_share);
        p.integer("max_class_size", c.population.max_class_size);
        p.integer("initial_friendship_attempts", c.population.initial_friendship_attempts);
        if (const auto* pr = p.find("propensity")) {
            Fields q{*pr, "population.propensity"};
            q.number("mu", c.population.propensity.mu);
            q.number("sigma", c.population.propensity.sigma);
            q.number("threshold_quantile", c.population.propensity.threshold_quantile);
            q.finish();
        }
        if (const auto* sj = p.find("oc_seed")) {
            Fields s{*sj, "population.oc_seed"};
            s.integer("member_count", c.population.oc_seed.member_count);
            s.parsed("topology", c.population.oc_seed.topology, parse_oc_topology);
            s.integer("branching_factor", c.population.oc_seed.branching_factor);
            s.finish();
        }
        p.finish();
    }
    c.lifecycle.unemployment_target = c.population.unemployment_rate;

    if (const auto* lj = f.find("lifecycle")) {
        Fields l{*lj, "lifecycle"};
        auto& lc = c.lifecycle;
        l.number("friendship_make_rate", lc.friendship_make_rate);
        l.number("friendship_break_rate", lc.friendship_break_rate);
        l.number("high_school_completion", lc.high_school_completion);
        l.number("higher_education_share", lc.higher_education_share);
        l.number("unemployment_target", lc.unemployment_target);
        l.number("job_separation_rate", lc.job_separation_rate);
        l.integer("partner_age_gap", lc.partner_age_gap);
        l.finish();
    }

    if (const auto* cj = f.find("crime")) {
        Fields k{*cj, "crime"};
        k.number("facilitator_multiplier", c.crime.facilitator_multiplier);
        k.integer("minimum_age_years", c.crime.minimum_age_years);
        k.integer("criminal_window_months", c.crime.criminal_window_months);
        k.number("calibration_band", c.crime.calibration_band);
        if (const auto* b = k.find("baseline")) c.crime.baseline = baseline_from_json(*b, "crime.baseline");
        if (const auto* r = k.find("risk_factors")) c.crime.risk_factors = risk_factors_from_json(*r, "crime.risk_factors");
        k.finish();
    }

    if (const auto* bj = f.find("distribution_bundle")) {
        if (!bj->is_string()) throw ConfigError("distribution_bundle", "expected a directory path");
        c.distribution_bundle = bj->get<std::string>();
        std::filesystem::path dir{*c.distribution_bundle};
        if (dir.is_relative()) dir = base_dir / dir;
        if (!std::filesystem::is_directory(dir))
            throw ConfigError("distribution_bundle", fmt::format("not a directory: {}", dir.string()));
        try {
            c.distributions = load_distribution_bundle(dir);
        } catch (const ConfigError& e) {
            throw ConfigError(join_path("distributions", e.path()), e.message());
        }
    }
    if (const auto* dj = f.find("distributions")) {
        if (!dj->is_object()) throw ConfigError("distributions", "expected an object of named tables");
        for (auto it = dj->begin(); it != dj->end(); ++it)
            c.distributions[it.key()] = distribution_from_json(it.value(), it.key(), join_path("distributions", it.key()));
    }
    if (!f.find("distribution_bundle") && !f.find("distributions"))
        throw ConfigError("distributions", "either distributions or distribution_bundle is required");

    if (const auto* pj = f.find("policies")) {
        if (!pj->is_array()) throw ConfigError("policies", "expected an array");
        for (std::size_t i = 0; i < pj->size(); ++i)
            c.policies.push_back(policy_from_json((*pj)[i], fmt::format("policies[{}]", i)));
    }
    f.finish();
    c.sync();
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(file.string(), "cannot read scenario file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string(), fmt::format("malformed JSON: {}", e.what()));
    }
    return scenario_from_json(doc, file.parent_path());
}

json to_json(const ScenarioConfig& c, bool bundle_reference) {
    json doc;
    doc["schema_version"] = kScenarioSchemaVersion;
    doc["name"] = c.name;
    doc["seed"] = c.seed;
    doc["horizon_ticks"] = c.horizon_ticks;
    doc["ticks_per_year"] = c.ticks_per_year;
    doc["h"] = c.h;
    doc["rho"] = c.rho;
    const auto& p = c.population;
    doc["population"] = {
        {"population_size", p.population_size},
        {"unemployment_rate", p.unemployment_rate},
        {"school_attendance", p.school_attendance},
        {"facilitator_share", p.facilitator_share},
        {"max_class_size", p.max_class_size},
        {"initial_friendship_attempts", p.initial_friendship_attempts},
        {"propensity", {{"mu", p.propensity.mu}, {"sigma", p.propensity.sigma},
                        {"threshold_quantile", p.propensity.threshold_quantile}}},
        {"oc_seed", {{"member_count", p.oc_seed.member_count}, {"topology", to_string(p.oc_seed.topology)},
                     {"branching_factor", p.oc_seed.branching_factor}}},
    };
    const auto& l = c.lifecycle;
    doc["lifecycle"] = {
        {"friendship_make_rate", l.friendship_make_rate},
        {"friendship_break_rate", l.friendship_break_rate},
        {"high_school_completion", l.high_school_completion},
        {"higher_education_share", l.higher_education_share},
        {"unemployment_target", l.unemployment_target},
        {"job_separation_rate", l.job_separation_rate},
        {"partner_age_gap", l.partner_age_gap},
    };
    json baseline = json::array();
    for (std::size_t k = 0; k < kClassCount; ++k) {
        const auto& r = c.crime.baseline.rows()[k];
        baseline.push_back({{"class", class_label(k)}, {"probability", r.probability}, {"odds_ratio", r.odds_ratio}});
    }
    json factors;
    for (const auto& s : c.crime.risk_factors.specs()) factors[std::string(to_string(s.factor))] = s.odds_ratio;
    doc["crime"] = {
        {"facilitator_multiplier", c.crime.facilitator_multiplier},
        {"minimum_age_years", c.crime.minimum_age_years},
        {"criminal_window_months", c.crime.criminal_window_months},
        {"calibration_band", c.crime.calibration_band},
        {"baseline", std::move(baseline)},
        {"risk_factors", std::move(factors)},
    };
    if (bundle_reference && c.distribution_bundle) {
        doc["distribution_bundle"] = *c.distribution_bundle;
    } else {
        json d = json::object();
        for (const auto& [name, t] : c.distributions) d[name] = to_json(t);
        doc["distributions"] = std::move(d);
    }
    json policies = json::array();
    for (const auto& s : c.policies) policies.push_back(to_json(s));
    doc["policies"] = std::move(policies);
    return doc;
}

std::string scenario_hash(const ScenarioConfig& config) {
    const auto text = to_json(config, false).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return fmt::format("{:016x}", h);
}

std::vector<Diagnostic> validate_scenario(const json& doc, const std::filesystem::path& base_dir) {
    try {
        scenario_from_json(doc, base_dir);
    } catch (const ConfigError& e) {
        return {{e.path(), e.message()}};
    } catch (const json::exception& e) {
        return {{"", e.what()}};
    }
    return {};
}

} // namespace ocsim
