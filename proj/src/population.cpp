#include "ocsim/population.hpp"

#include "ocsim/dynamics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <fmt/format.h>

namespace ocsim {

namespace {

constexpr int kMaxAgeYears = 120;

/// Unassigned agents bucketed by gender and age in years.
class AgePools {
public:
    explicit AgePools(const std::vector<Agent>& agents) {
        for (auto& g : buckets_) g.resize(kMaxAgeYears + 1);
        for (const auto& a : agents) {
            buckets_[static_cast<std::size_t>(a.gender)][std::min(a.age_years(), kMaxAgeYears)].push_back(a.id);
        }
    }

    /// Age nearest to `target` within [lo, hi] that still has an agent of `gender`.
    std::optional<int> nearest(Gender gender, int target, int lo, int hi) const {
        lo = std::max(lo, 0);
        hi = std::min(hi, kMaxAgeYears);
        if (lo > hi) return std::nullopt;
        target = std::clamp(target, lo, hi);
        const auto& pool = buckets_[static_cast<std::size_t>(gender)];
        for (int delta = 0; delta <= hi - lo; ++delta) {
            if (target - delta >= lo && !pool[target - delta].empty()) return target - delta;
            if (target + delta <= hi && !pool[target + delta].empty()) return target + delta;
        }
        return std::nullopt;
    }

    /// Takes an agent of `gender` whose age is nearest to `target` within [lo, hi].
    std::optional<AgentId> take(Gender gender, int target, int lo, int hi, Rng& rng) {
        const auto age = nearest(gender, target, lo, hi);
        if (!age) return std::nullopt;
        return take_at(gender, *age, rng);
    }

    /// Same as take() over both genders.
    std::optional<AgentId> take_any(int target, int lo, int hi, Rng& rng) {
        const auto f = nearest(Gender::Female, target, lo, hi);
        const auto m = nearest(Gender::Male, target, lo, hi);
        if (!f && !m) return std::nullopt;
        if (!f) return take_at(Gender::Male, *m, rng);
        if (!m) return take_at(Gender::Female, *f, rng);
        const int df = std::abs(*f - target), dm = std::abs(*m - target);
        if (df == dm) return rng.bernoulli(0.5) ? take_at(Gender::Male, *m, rng) : take_at(Gender::Female, *f, rng);
        return df < dm ? take_at(Gender::Female, *f, rng) : take_at(Gender::Male, *m, rng);
    }

    std::size_t count(int lo, int hi) const {
        std::size_t n = 0;
        for (const auto& g : buckets_) {
            for (int age = std::max(lo, 0); age <= std::min(hi, kMaxAgeYears); ++age) n += g[age].size();
        }
        return n;
    }

    std::vector<AgentId> drain(int lo, int hi) {
        std::vector<AgentId> out;
        for (auto& g : buckets_) {
            for (int age = std::max(lo, 0); age <= std::min(hi, kMaxAgeYears); ++age) {
                out.insert(out.end(), g[age].begin(), g[age].end());
                g[age].clear();
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    AgentId take_at(Gender gender, int age, Rng& rng) {
        auto& bucket = buckets_[static_cast<std::size_t>(gender)][age];
        const auto i = static_cast<std::size_t>(rng.index(bucket.size()));
        const AgentId id = bucket[i];
        bucket[i] = bucket.back();
        bucket.pop_back();
        return id;
    }

    std::array<std::vector<std::vector<AgentId>>, 2> buckets_;
};

void link_clique(MultiplexGraph& graph, LayerId layer, std::span<const AgentId> members, Tick tick) {
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) graph.add_edge(layer, members[i], members[j], tick);
    }
}

int age_months_in_bin(const DistributionBin& bin, Rng& rng) {
    const int lo = static_cast<int>(std::lround(bin.lower * kMonthsPerYear));
    const int hi = static_cast<int>(std::lround(bin.upper * kMonthsPerYear));
    return hi > lo ? lo + static_cast<int>(rng.index(static_cast<std::uint64_t>(hi - lo))) : lo;
}

Education child_education(int years) {
    if (years >= kUpperSecondaryAge) return Education::Secondary;
    if (years >= kLowerSecondaryAge) return Education::Primary;
    return Education::None;
}

void require_kind(const PopulationConfig& config, std::string_view name, DistributionKind kind) {
    const auto& t = config.table(name);
    if (t.kind != kind)
        throw ConfigError(std::string(name), fmt::format("expected a {} table, got {}", to_string(kind), to_string(t.kind)));
}

} // namespace

double PropensityParams::threshold() const {
    const boost::math::normal_distribution<double> standard;
    return std::exp(mu + sigma * boost::math::quantile(standard, threshold_quantile));
}

std::string_view to_string(OcTopology t) noexcept { return t == OcTopology::Clique ? "clique" : "tree"; }

OcTopology parse_oc_topology(std::string_view s) {
    if (s == "clique") return OcTopology::Clique;
    if (s == "tree") return OcTopology::Tree;
    throw ConfigError("topology", fmt::format("unknown OC topology '{}' (expected clique or tree)", s));
}

const DistributionTable& PopulationConfig::table(std::string_view name) const {
    auto it = distributions.find(std::string(name));
    if (it == distributions.end()) throw ConfigError(std::string(name), "required distribution table is missing");
    return it->second;
}

void PopulationConfig::validate() const {
    if (population_size < 100) throw ConfigError("population_size", "must be at least 100");
    if (!(unemployment_rate >= 0.0 && unemployment_rate <= 1.0))
        throw ConfigError("unemployment_rate", "must lie in [0, 1]");
    if (!(propensity.sigma > 0.0)) throw ConfigError("propensity.sigma", "must be positive");
    if (!(propensity.threshold_quantile > 0.0 && propensity.threshold_quantile < 1.0))
        throw ConfigError("propensity.threshold_quantile", "must lie in (0, 1)");
    if (max_class_size < 1) throw ConfigError("max_class_size", "must be positive");
    if (!(school_attendance >= 0.0 && school_attendance <= 1.0))
        throw ConfigError("school_attendance", "must lie in [0, 1]");
    if (!(facilitator_share >= 0.0 && facilitator_share <= 1.0))
        throw ConfigError("facilitator_share", "must lie in [0, 1]");
    if (initial_friendship_attempts < 0) throw ConfigError("initial_friendship_attempts", "must be non-negative");

    for (const auto& [name, t] : distributions) t.validate();
    require_kind(*this, tables::kAgeByGender, DistributionKind::PiecewiseByAge);
    require_kind(*this, tables::kHouseholdHeadAge, DistributionKind::PiecewiseByAge);
    require_kind(*this, tables::kHouseholdTypeByHeadAge, DistributionKind::Conditional);
    require_kind(*this, tables::kChildrenPerFamily, DistributionKind::Categorical);
    require_kind(*this, tables::kEducationByAge, DistributionKind::Conditional);
    require_kind(*this, tables::kWealthByEducation, DistributionKind::Conditional);
    require_kind(*this, tables::kEmployerSize, DistributionKind::Categorical);
    for (const auto& b : table(tables::kAgeByGender).bins) parse_gender(b.label);
    for (const auto& b : table(tables::kEducationByAge).bins) parse_education(b.label);
    for (const auto& b : table(tables::kHouseholdTypeByHeadAge).bins) {
        if (b.label != "single" && b.label != "couple" && b.label != "couple_children" && b.label != "single_parent" &&
            b.label != "extended")
            throw ConfigError(std::string(tables::kHouseholdTypeByHeadAge),
                              fmt::format("unknown household type '{}' (expected single, couple, couple_children, "
                                          "single_parent or extended)",
                                          b.label));
    }
    for (const auto& b : table(tables::kEmployerSize).bins) {
        if (b.lower < 1.0) throw ConfigError(std::string(tables::kEmployerSize), "employer sizes must be >= 1");
    }

    const auto& seed = oc_seed;
    seed.gender_distribution.validate();
    seed.age_distribution.validate();
    for (const auto& b : seed.gender_distribution.bins) parse_gender(b.label);
    if (seed.member_count * 10 >= population_size)
        throw ConfigError("oc_seed.member_count", "must be below a tenth of the population size");
    if (seed.topology == OcTopology::Tree && seed.branching_factor < 1)
        throw ConfigError("oc_seed.branching_factor", "must be at least 1");
}

double sample_propensity(const PropensityParams& params, Rng& rng) {
    return std::exp(params.mu + params.sigma * rng.normal());
}

std::vector<Agent> draw_agents(const PopulationConfig& config, Rng& rng) {
    const auto& age_table = config.table(tables::kAgeByGender);
    const auto& education_table = config.table(tables::kEducationByAge);
    const auto& wealth_table = config.table(tables::kWealthByEducation);
    std::vector<Agent> agents(config.population_size);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        auto& a = agents[i];
        a.id = static_cast<AgentId>(i);
        const auto& bin = age_table.bins[age_table.sample_bin(rng)];
        a.gender = parse_gender(bin.label);
        a.age_months = age_months_in_bin(bin, rng);
        const int years = a.age_years();
        a.education = years < kSchoolLeavingAge ? child_education(years)
                                                : parse_education(education_table.sample_conditional(years, rng));
        a.wealth = std::stoi(wealth_table.sample_conditional(static_cast<double>(a.education), rng));
        a.propensity = sample_propensity(config.propensity, rng);
    }
    return agents;
}

void assign_households(Society& society, const PopulationConfig& config, Rng& rng) {
    const auto& head_age = config.table(tables::kHouseholdHeadAge);
    const auto& type_table = config.table(tables::kHouseholdTypeByHeadAge);
    const auto& children_table = config.table(tables::kChildrenPerFamily);

    AgePools pools(society.agents);
    std::vector<AgentId> heads;
    auto found_household = [&](AgentId head) {
        const auto hh = society.new_household();
        society.households[hh].members.push_back(head);
        society.agents[head].household = hh;
        heads.push_back(head);
        return hh;
    };
    auto add_member = [&](HouseholdId hh, AgentId id) {
        society.households[hh].members.push_back(id);
        society.agents[id].household = hh;
    };
    auto set_parents = [&](AgentId child, AgentId head) {
        auto& c = society.agents[child];
        c.parents[0] = head;
        c.parents[1] = society.agents[head].partner;
    };

    constexpr int kAdultAge = 18;
    while (pools.count(kAdultAge, kMaxAgeYears) > 0) {
        const auto& bin = head_age.bins[head_age.sample_bin(rng)];
        const int target = age_months_in_bin(bin, rng) / kMonthsPerYear;
        const auto head_id = pools.take_any(target, kAdultAge, kMaxAgeYears, rng);
        if (!head_id) break;
        const auto hh = found_household(*head_id);
        auto& head = society.agents[*head_id];
        const int head_years = head.age_years();
        const auto& type = type_table.sample_conditional(head_years, rng);

        const bool with_partner = type == "couple" || type == "couple_children" || type == "extended";
        const bool with_children = type == "couple_children" || type == "single_parent" || type == "extended";
        if (with_partner) {
            const auto other = head.gender == Gender::Male ? Gender::Female : Gender::Male;
            const int offset = static_cast<int>(std::lround(rng.normal() * 3.0));
            if (auto p = pools.take(other, head_years + offset, std::max(kAdultAge, head_years - 8), head_years + 8,
                                    rng)) {
                add_member(hh, *p);
                society.agents[*head_id].partner = *p;
                society.agents[*p].partner = *head_id;
            }
        }
        if (with_children) {
            const auto k = children_table.sample_integer(rng);
            for (std::int64_t c = 0; c < k; ++c) {
                const int child_target = head_years - static_cast<int>(rng.between(20, 40));
                const auto child = pools.take_any(child_target, std::max(0, head_years - 45), head_years - 16, rng);
                if (!child) break;
                add_member(hh, *child);
                set_parents(*child, *head_id);
            }
        }
        if (type == "extended") {
            if (auto rel = pools.take_any(head_years + static_cast<int>(rng.between(20, 30)), head_years + 15,
                                          kMaxAgeYears, rng))
                add_member(hh, *rel);
        }
    }

    // Minors left without a household join a family whose head could be their parent.
    for (AgentId child : pools.drain(0, kMaxAgeYears)) {
        const int years = society.agents[child].age_years();
        std::optional<AgentId> chosen;
        for (int attempt = 0; attempt < 64 && !heads.empty(); ++attempt) {
            const AgentId h = heads[rng.index(heads.size())];
            const int gap = society.agents[h].age_years() - years;
            if (gap >= 16 && gap <= 45) {
                chosen = h;
                break;
            }
        }
        if (!chosen && !heads.empty()) chosen = heads[rng.index(heads.size())];
        if (!chosen) {
            found_household(child);
            continue;
        }
        add_member(society.agents[*chosen].household, child);
        set_parents(child, *chosen);
    }

    for (const auto& hh : society.households) link_clique(society.graph, LayerId::Household, hh.members, kSynthesisTick);
}

void assign_schools(Society& society, const PopulationConfig& config, Rng& rng) {
    society.max_class_size = config.max_class_size;
    for (auto& a : society.agents) {
        const auto level = school_level_for_age(a.age_years());
        if (!level || !rng.bernoulli(config.school_attendance)) continue;
        society.join_class(a.id, society.class_with_room(*level, cohort_of(a, 0)), kSynthesisTick);
    }
}

void assign_jobs(Society& society, const PopulationConfig& config, Rng& rng) {
    const auto& sizes = config.table(tables::kEmployerSize);
    std::vector<AgentId> labor_force;
    for (const auto& a : society.agents) {
        if (society.in_labor_force(a)) labor_force.push_back(a.id);
    }
    rng.shuffle(labor_force);
    const auto employed = static_cast<std::size_t>(
        std::llround((1.0 - config.unemployment_rate) * static_cast<double>(labor_force.size())));
    std::size_t next = 0;
    while (next < employed) {
        const auto size = static_cast<std::size_t>(sizes.sample_integer(rng));
        const auto firm = society.new_employer(static_cast<int>(size), rng.bernoulli(config.facilitator_share));
        const auto end = std::min(employed, next + size);
        for (; next < end; ++next) {
            auto& a = society.agents[labor_force[next]];
            a.employed = true;
            a.employer = firm;
            society.employers[firm].members.push_back(a.id);
        }
        link_clique(society.graph, LayerId::WorkSchool, society.employers[firm].members, kSynthesisTick);
    }
}

void seed_oc_group(Society& society, const OcSeedConfig& seed, Rng& rng) {
    constexpr int kMinimumAge = 14;
    std::vector<AgentId> eligible;
    for (const auto& a : society.agents) {
        if (a.free() && !a.oc_member && a.age_years() >= kMinimumAge) eligible.push_back(a.id);
    }
    if (seed.member_count > eligible.size())
        throw ConfigError("oc_seed.member_count",
                          fmt::format("{} members requested but only {} agents are eligible", seed.member_count,
                                      eligible.size()));

    std::vector<std::uint8_t> taken(society.agents.size(), 0);
    std::vector<AgentId> members;
    auto pick = [&](auto&& accept) -> std::optional<AgentId> {
        std::vector<AgentId> pool;
        for (auto id : eligible) {
            if (!taken[id] && accept(society.agents[id])) pool.push_back(id);
        }
        if (pool.empty()) return std::nullopt;
        return pool[rng.index(pool.size())];
    };
    for (std::size_t m = 0; m < seed.member_count; ++m) {
        const auto gender = parse_gender(seed.gender_distribution.bins[seed.gender_distribution.sample_bin(rng)].label);
        const auto& bin = seed.age_distribution.bins[seed.age_distribution.sample_bin(rng)];
        auto in_bin = [&](const Agent& a) { return a.age_years() >= bin.lower && a.age_years() < bin.upper; };
        auto id = pick([&](const Agent& a) { return a.gender == gender && in_bin(a); });
        if (!id) id = pick(in_bin);
        if (!id) id = pick([](const Agent&) { return true; });
        taken[*id] = 1;
        members.push_back(*id);
    }

    // Oldest member at the root of the hierarchy.
    std::stable_sort(members.begin(), members.end(), [&](AgentId x, AgentId y) {
        return society.agents[x].age_months > society.agents[y].age_months;
    });
    for (auto id : members) society.set_oc_member(id, true);
    if (seed.topology == OcTopology::Clique) {
        link_clique(society.graph, LayerId::OcGroup, members, kSynthesisTick);
    } else {
        const auto b = static_cast<std::size_t>(seed.branching_factor);
        for (std::size_t i = 1; i < members.size(); ++i)
            society.graph.add_edge(LayerId::OcGroup, members[i], members[(i - 1) / b], kSynthesisTick);
    }
}

Society synthesize_population(const PopulationConfig& config, Rng& rng) {
    config.validate();
    Society society;
    society.max_class_size = config.max_class_size;
    society.agents = draw_agents(config, rng);
    society.graph = MultiplexGraph(society.agents.size());
    assign_households(society, config, rng);
    assign_schools(society, config, rng);
    assign_jobs(society, config, rng);
    for (auto& a : society.agents) {
        if (a.age_years() < 4) continue;
        for (int i = 0; i < config.initial_friendship_attempts; ++i)
            attempt_friendship(society, a.id, kSynthesisTick, rng);
    }
    seed_oc_group(society, config.oc_seed, rng);
    return society;
}

Society synthesize_population(const PopulationConfig& config) {
    Rng rng{config.random_seed};
    return synthesize_population(config, rng);
}

std::string export_roster(const Society& society) {
    std::string out = "id,gender,age_months,education,employed,employer_id,class_id,wealth,propensity,oc_member,"
                      "incarcerated,alive,household_id,parent_a,parent_b,partner_id,crime_count\n";
    auto opt = [](const auto& v) { return v ? fmt::format("{}", *v) : std::string(); };
    for (const auto& a : society.agents) {
        out += fmt::format("{},{},{},{},{:d},{},{},{},{},{:d},{:d},{:d},{},{},{},{},{}\n", a.id, to_string(a.gender),
                           a.age_months, to_string(a.education), a.employed, opt(a.employer), opt(a.school_class),
                           a.wealth, a.propensity, a.oc_member, a.incarcerated(), a.alive, a.household,
                           opt(a.parents[0]), opt(a.parents[1]), opt(a.partner), a.crime_history.size());
    }
    return out;
}

std::string export_edges(std::span<const EdgeRecord> edges) {
    std::string out = "source_id,target_id,layer,created_tick\n";
    for (const auto& e : edges) out += fmt::format("{},{},{},{}\n", e.source, e.target, to_string(e.layer), e.created);
    return out;
}

std::string export_edges(const Society& society) {
    std::vector<EdgeRecord> all;
    for (auto layer : kAllLayers) {
        auto e = society.graph.edges(layer);
        all.insert(all.end(), e.begin(), e.end());
    }
    return export_edges(all);
}

} // namespace ocsim
