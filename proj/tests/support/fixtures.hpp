#pragma once

#include "ocsim/scenario.hpp"
#include "ocsim/society.hpp"

#include <vector>

namespace ocsim::testing {

/// Bare agent of the given gender and age, living in its own household.
inline AgentId add_person(Society& s, Gender g, int age_years, bool oc = false) {
    Agent a;
    a.gender = g;
    a.age_months = age_years * kMonthsPerYear;
    a.oc_member = oc;
    const auto hh = s.new_household();
    const auto id = s.add_agent(a);
    s.agent(id).household = hh;
    s.households[hh].members.push_back(id);
    return id;
}

/// n unconnected adults (alternating gender, ages 20..).
inline Society make_society(std::size_t n, int age_years = 30) {
    Society s;
    for (std::size_t i = 0; i < n; ++i) add_person(s, i % 2 ? Gender::Male : Gender::Female, age_years);
    return s;
}

/// Default scenario scaled down for quick runs.
inline ScenarioConfig small_scenario(std::size_t population = 600, Tick horizon = 24, std::uint64_t seed = 7) {
    auto c = default_scenario();
    c.population.population_size = population;
    c.population.oc_seed.member_count = population / 20;
    c.horizon_ticks = horizon;
    c.seed = seed;
    c.sync();
    return c;
}

} // namespace ocsim::testing
