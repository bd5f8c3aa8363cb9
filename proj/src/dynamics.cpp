#include "ocsim/dynamics.hpp"

#include "ocsim/population.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace ocsim {

namespace {

constexpr int kFriendshipMinAge = 4;
constexpr int kContextCandidates = 10;
constexpr int kRandomCandidates = 10;
constexpr int kPartnerSearchDraws = 200;
constexpr double kContextWeight = 10.0;
constexpr double kAgeKernelYears = 10.0;

void check_rate(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(fmt::format("lifecycle.{}", name), "must lie in [0, 1]");
}

bool is_friend_of_household(const Society& society, const Agent& a, AgentId b) {
    for (auto m : society.households[a.household].members) {
        if (m != a.id && society.graph.has_edge(LayerId::Friendship, m, b)) return true;
    }
    return false;
}

} // namespace

void LifecycleConfig::validate() const {
    fertility_by_age.validate();
    mortality_by_age_gender.validate();
    partnership_by_age.validate();
    for (const auto* t : {&fertility_by_age, &mortality_by_age_gender, &partnership_by_age}) {
        if (t->kind != DistributionKind::ScalarRate)
            throw ConfigError(t->name, fmt::format("expected a scalar-rate table, got {}", to_string(t->kind)));
    }
    check_rate(friendship_make_rate, "friendship_make_rate");
    check_rate(friendship_break_rate, "friendship_break_rate");
    check_rate(high_school_completion, "high_school_completion");
    check_rate(higher_education_share, "higher_education_share");
    check_rate(unemployment_target, "unemployment_target");
    check_rate(job_separation_rate, "job_separation_rate");
    if (partner_age_gap < 0) throw ConfigError("lifecycle.partner_age_gap", "must be non-negative");
}

double per_tick_probability(double annual, int ticks_per_year) {
    if (annual <= 0.0) return 0.0;
    if (annual >= 1.0) return 1.0;
    return 1.0 - std::pow(1.0 - annual, 1.0 / ticks_per_year);
}

DemographyEvents step_demography(Society& society, const LifecycleConfig& config, Tick tick, Rng& rng,
                                 const std::function<double(Rng&)>& newborn_propensity) {
    DemographyEvents events;
    const auto n = static_cast<AgentId>(society.agents.size());
    for (AgentId id = 0; id < n; ++id) {
        if (society.agents[id].alive) ++society.agents[id].age_months;
    }
    for (AgentId id = 0; id < n; ++id) {
        const auto& a = society.agents[id];
        if (!a.alive) continue;
        const double annual = config.mortality_by_age_gender.rate(to_string(a.gender), a.age_months / 12.0);
        if (rng.bernoulli(per_tick_probability(annual))) {
            society.kill(id);
            events.deaths.push_back(id);
        }
    }
    for (AgentId id = 0; id < n; ++id) {
        const auto& mother = society.agents[id];
        if (!mother.free() || mother.gender != Gender::Female || !mother.partner) continue;
        const auto father_id = *mother.partner;
        if (!society.agents[father_id].free()) continue;
        const double annual = config.fertility_by_age.rate("F", mother.age_months / 12.0);
        if (!rng.bernoulli(per_tick_probability(annual))) continue;

        Agent baby;
        baby.gender = rng.bernoulli(0.5) ? Gender::Male : Gender::Female;
        baby.age_months = 0;
        baby.wealth = mother.wealth;
        baby.propensity = newborn_propensity(rng);
        baby.parents = {id, father_id};
        baby.household = mother.household;
        const HouseholdId household = mother.household;
        const AgentId baby_id = society.add_agent(std::move(baby));
        society.move_to_household(baby_id, household, tick);
        events.births.push_back(baby_id);
    }
    return events;
}

bool shares_context(const Society& society, const Agent& a, const Agent& b) {
    if (a.school_class && a.school_class == b.school_class) return true;
    if (a.employer && a.employer == b.employer) return true;
    if (a.household == b.household) return true;
    if (society.graph.has_edge(LayerId::WorkSchool, a.id, b.id)) return true;
    return is_friend_of_household(society, a, b.id) || is_friend_of_household(society, b, a.id);
}

double friendship_formation_weight(const Society& society, const Agent& a, const Agent& b) {
    const double context = shares_context(society, a, b) ? kContextWeight : 1.0;
    const double gap_years = std::abs(a.age_months - b.age_months) / 12.0;
    return context * std::exp(-gap_years / kAgeKernelYears);
}

std::optional<AgentId> attempt_friendship(Society& society, AgentId id, Tick tick, Rng& rng) {
    const auto& a = society.agents[id];
    if (!a.free()) return std::nullopt;
    const auto& graph = society.graph;

    std::vector<AgentId> context;
    for (const auto& adj : graph.adjacency(LayerId::WorkSchool, id)) context.push_back(adj.id);
    for (auto m : society.households[a.household].members) {
        if (m == id || !graph.contains(m)) continue;
        for (const auto& adj : graph.adjacency(LayerId::Friendship, m)) context.push_back(adj.id);
    }

    std::vector<AgentId> candidates;
    for (int i = 0; i < kContextCandidates && !context.empty(); ++i) candidates.push_back(context[rng.index(context.size())]);
    const auto n = society.agents.size();
    for (int i = 0; i < kRandomCandidates; ++i) candidates.push_back(static_cast<AgentId>(rng.index(n)));

    std::vector<std::pair<AgentId, double>> weighted;
    double total = 0.0;
    for (auto c : candidates) {
        const auto& b = society.agents[c];
        if (c == id || !b.free() || b.age_years() < kFriendshipMinAge || graph.has_edge(LayerId::Friendship, id, c))
            continue;
        const double w = friendship_formation_weight(society, a, b);
        weighted.emplace_back(c, w);
        total += w;
    }
    if (weighted.empty()) return std::nullopt;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    AgentId chosen = weighted.back().first;
    for (const auto& [c, w] : weighted) {
        acc += w;
        if (u < acc) {
            chosen = c;
            break;
        }
    }
    society.graph.add_edge(LayerId::Friendship, id, chosen, tick);
    return chosen;
}

namespace {

void step_partnership(Society& society, const LifecycleConfig& config, Tick tick, Rng& rng) {
    const auto n = static_cast<AgentId>(society.agents.size());
    for (AgentId id = 0; id < n; ++id) {
        const auto& a = society.agents[id];
        if (!a.free() || a.partner || a.age_years() < 18) continue;
        const double annual = config.partnership_by_age.rate("*", a.age_months / 12.0);
        if (!rng.bernoulli(per_tick_probability(annual))) continue;

        auto suitable = [&](AgentId c) {
            const auto& b = society.agents[c];
            return c != id && b.free() && !b.partner && b.gender != a.gender && b.age_years() >= 18 &&
                   b.household != a.household &&
                   std::abs(b.age_months - a.age_months) <= config.partner_age_gap * kMonthsPerYear;
        };
        std::optional<AgentId> match;
        for (const auto& adj : society.graph.adjacency(LayerId::Friendship, id)) {
            if (suitable(adj.id)) {
                match = adj.id;
                break;
            }
        }
        for (int draw = 0; draw < kPartnerSearchDraws && !match; ++draw) {
            const auto c = static_cast<AgentId>(rng.index(n));
            if (suitable(c)) match = c;
        }
        if (!match) continue;

        // The couple founds a household and brings along their own minor children.
        std::vector<AgentId> movers{id, *match};
        for (auto parent : {id, *match}) {
            for (auto m : society.households[society.agents[parent].household].members) {
                const auto& c = society.agents[m];
                if (c.age_years() < 18 && (c.parents[0] == parent || c.parents[1] == parent)) movers.push_back(m);
            }
        }
        society.agents[id].partner = *match;
        society.agents[*match].partner = id;
        const auto hh = society.new_household();
        for (auto m : movers) society.move_to_household(m, hh, tick);
    }
}

void step_friendships(Society& society, const LifecycleConfig& config, Tick tick, Rng& rng) {
    const double p_break = per_tick_probability(config.friendship_break_rate);
    const double p_make = per_tick_probability(config.friendship_make_rate);
    auto& graph = society.graph;
    const auto n = static_cast<AgentId>(society.agents.size());
    for (AgentId id = 0; id < n; ++id) {
        if (!graph.contains(id)) continue;
        const auto friends = graph.neighbors(LayerId::Friendship, id);
        for (auto f : friends) {
            if (f > id && rng.bernoulli(p_break)) graph.remove_edge(LayerId::Friendship, id, f);
        }
    }
    for (AgentId id = 0; id < n; ++id) {
        const auto& a = society.agents[id];
        if (!a.free() || a.age_years() < kFriendshipMinAge) continue;
        if (rng.bernoulli(p_make)) attempt_friendship(society, id, tick, rng);
    }
}

} // namespace

void step_schooling(Society& society, const LifecycleConfig& config, Tick tick, Rng& rng, double attendance) {
    const auto n = static_cast<AgentId>(society.agents.size());
    for (AgentId id = 0; id < n; ++id) {
        auto& a = society.agents[id];
        if (!a.alive || a.age_months % kMonthsPerYear != 0) continue;
        const int years = a.age_years();
        if (years == kSchoolEntryAge) {
            if (a.free() && rng.bernoulli(attendance))
                society.join_class(id, society.class_with_room(SchoolLevel::Primary, cohort_of(a, tick)), tick);
        } else if (years == kLowerSecondaryAge || years == kUpperSecondaryAge) {
            if (!a.school_class) continue;
            a.education = years == kLowerSecondaryAge ? Education::Primary : Education::Secondary;
            const auto level = years == kLowerSecondaryAge ? SchoolLevel::LowerSecondary : SchoolLevel::UpperSecondary;
            society.join_class(id, society.class_with_room(level, cohort_of(a, tick)), tick);
        } else if (years == kSchoolLeavingAge) {
            const bool attended = a.school_class.has_value();
            society.leave_class(id);
            if (a.education_pinned || (attended && rng.bernoulli(config.high_school_completion))) {
                a.education = std::max(a.education, Education::HighSchool);
                if (rng.bernoulli(config.higher_education_share)) a.education = Education::Higher;
            } else if (attended) {
                a.education = std::max(a.education, Education::Secondary);
            }
        }
    }
}

EmployerId hire(Society& society, AgentId id, const DistributionTable& employer_size, double facilitator_share,
                Tick tick, Rng& rng) {
    const auto count = society.employers.size();
    std::optional<EmployerId> firm;
    if (count > 0) {
        const auto start = static_cast<std::size_t>(rng.index(count));
        for (std::size_t k = 0; k < count; ++k) {
            const auto& e = society.employers[(start + k) % count];
            if (static_cast<int>(e.members.size()) < e.capacity) {
                firm = e.id;
                break;
            }
        }
    }
    if (!firm) {
        const auto size = static_cast<int>(employer_size.sample_integer(rng));
        firm = society.new_employer(size, rng.bernoulli(facilitator_share));
    }
    society.employ(id, *firm, tick);
    return *firm;
}

double employment_rate(const Society& society) {
    std::size_t force = 0, employed = 0;
    for (const auto& a : society.agents) {
        if (!society.in_labor_force(a)) continue;
        ++force;
        if (a.employed) ++employed;
    }
    return force == 0 ? 0.0 : static_cast<double>(employed) / static_cast<double>(force);
}

void step_labor_market(Society& society, const LifecycleConfig& config, const DistributionTable& employer_size,
                       double facilitator_share, Tick tick, Rng& rng) {
    const double p_separation = per_tick_probability(config.job_separation_rate);
    const auto n = static_cast<AgentId>(society.agents.size());
    for (AgentId id = 0; id < n; ++id) {
        const auto& a = society.agents[id];
        if (!a.alive || !a.employed) continue;
        if (a.age_years() >= kRetirementAge)
            society.unemploy(id);
        else if (society.in_labor_force(a) && rng.bernoulli(p_separation))
            society.unemploy(id);
    }

    std::vector<AgentId> employed, unemployed;
    for (const auto& a : society.agents) {
        if (!society.in_labor_force(a)) continue;
        (a.employed ? employed : unemployed).push_back(a.id);
    }
    const auto force = employed.size() + unemployed.size();
    const auto target = static_cast<std::size_t>(
        std::llround((1.0 - config.unemployment_target) * static_cast<double>(force)));
    if (employed.size() < target) {
        rng.shuffle(unemployed);
        const auto hires = target - employed.size();
        for (std::size_t i = 0; i < hires; ++i) hire(society, unemployed[i], employer_size, facilitator_share, tick, rng);
    } else if (employed.size() > target) {
        rng.shuffle(employed);
        const auto fires = employed.size() - target;
        for (std::size_t i = 0; i < fires; ++i) society.unemploy(employed[i]);
    }
}

void step_social(Society& society, const LifecycleConfig& config, const PopulationConfig& population, Tick tick,
                 Rng& rng) {
    step_partnership(society, config, tick, rng);
    step_friendships(society, config, tick, rng);
    step_schooling(society, config, tick, rng, population.school_attendance);
    step_labor_market(society, config, population.table(tables::kEmployerSize), population.facilitator_share, tick,
                      rng);
}

} // namespace ocsim
