#include "ocsim/dynamics.hpp"
#include "ocsim/population.hpp"
#include "ocsim/scenario.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

using namespace ocsim;
using ocsim::testing::add_person;

namespace {

struct World {
    ScenarioConfig config;
    Society society;
    Rng rng{0};
};

World make_world(std::size_t n, std::uint64_t seed = 3) {
    World w;
    w.config = ocsim::testing::small_scenario(n, 12, seed);
    w.rng = Rng{seed};
    w.society = synthesize_population(w.config.population, w.rng);
    return w;
}

double unit_propensity(Rng&) { return 1.0; }

std::size_t total_degree(const Society& s, AgentId id) {
    std::size_t d = 0;
    for (auto l : kAllLayers)
        for (const auto& e : s.graph.edges(l)) d += e.source == id || e.target == id;
    return d;
}

} // namespace

TEST_CASE("per-tick conversion") {
    CHECK(per_tick_probability(0.0) == 0.0);
    CHECK(per_tick_probability(1.0) == 1.0);
    CHECK(per_tick_probability(0.5, 1) == 0.5);
    CHECK(per_tick_probability(0.19) == doctest::Approx(1.0 - std::pow(0.81, 1.0 / 12.0)));
}

TEST_CASE("forced death at 100") {
    Society s;
    const auto old = add_person(s, Gender::Male, 99);
    s.agent(old).age_months += 11;
    const auto young = add_person(s, Gender::Female, 50);
    s.graph.add_edge(LayerId::Friendship, old, young, 0);

    auto lc = default_scenario().lifecycle;
    lc.mortality_by_age_gender.bins = {{"F", 0, 100, 0.0}, {"F", 100, 200, 1.0}, {"M", 0, 100, 0.0},
                                       {"M", 100, 200, 1.0}};
    Rng rng{1};
    const auto ev = step_demography(s, lc, 0, rng, unit_propensity);
    CHECK(ev.deaths == std::vector<AgentId>{old});
    CHECK_FALSE(s.agent(old).alive);
    CHECK(total_degree(s, old) == 0);
    CHECK_FALSE(s.graph.active(old));
    for (Tick t = 1; t < 24; ++t) {
        step_demography(s, lc, t, rng, unit_propensity);
        for (const auto& a : s.agents)
            if (a.alive) CHECK(a.age_years() < 100);
    }
}

TEST_CASE("no fertility, no growth") {
    auto w = make_world(800);
    auto lc = w.config.lifecycle;
    lc.fertility_by_age.bins = {{"F", 0, 200, 0.0}};
    const auto start = w.society.alive_count();
    for (Tick t = 0; t < 24; ++t) {
        CHECK(step_demography(w.society, lc, t, w.rng, unit_propensity).births.empty());
        step_social(w.society, lc, w.config.population, t, w.rng);
        CHECK(w.society.alive_count() <= start);
        CHECK(w.society.agents.size() == start);
    }
}

TEST_CASE("newborns live with their parents") {
    Society s;
    const auto mother = add_person(s, Gender::Female, 28);
    const auto father = add_person(s, Gender::Male, 30);
    s.move_to_household(father, s.agent(mother).household, 0);
    s.agent(mother).partner = father;
    s.agent(father).partner = mother;
    auto lc = default_scenario().lifecycle;
    lc.fertility_by_age.bins = {{"F", 0, 200, 1.0}};
    lc.mortality_by_age_gender.bins = {{"F", 0, 200, 0.0}, {"M", 0, 200, 0.0}};
    Rng rng{2};
    const auto ev = step_demography(s, lc, 5, rng, [](Rng&) { return 0.7; });
    REQUIRE(ev.births.size() == 1);
    const auto baby = ev.births[0];
    CHECK(s.graph.has_edge(LayerId::Household, baby, mother));
    CHECK(s.graph.has_edge(LayerId::Household, baby, father));
    CHECK(s.agent(baby).age_months == 0);
    CHECK(s.agent(baby).propensity == 0.7);
    CHECK(s.agent(baby).parents[0] == mother);
    CHECK(s.agent(baby).parents[1] == father);
    CHECK_FALSE(s.agent(baby).oc_member);
    CHECK(s.agent(baby).household == s.agent(mother).household);
}

TEST_CASE("friendship churn") {
    SUBCASE("break rate 1 clears the layer") {
        auto w = make_world(600);
        auto lc = w.config.lifecycle;
        lc.friendship_break_rate = 1.0;
        lc.friendship_make_rate = 0.0;
        REQUIRE_FALSE(w.society.graph.edges(LayerId::Friendship).empty());
        for (Tick t = 0; t < 12; ++t) step_social(w.society, lc, w.config.population, t, w.rng);
        CHECK(w.society.graph.edges(LayerId::Friendship).empty());
    }
    SUBCASE("make rate 0 only removes") {
        auto w = make_world(600);
        auto lc = w.config.lifecycle;
        lc.friendship_make_rate = 0.0;
        auto before = w.society.graph.edges(LayerId::Friendship);
        for (Tick t = 0; t < 12; ++t) {
            step_social(w.society, lc, w.config.population, t, w.rng);
            const auto now = w.society.graph.edges(LayerId::Friendship);
            for (const auto& e : now) CHECK(std::find(before.begin(), before.end(), e) != before.end());
            before = now;
        }
    }
}

TEST_CASE("classmates are likelier friends than strangers") {
    Society s;
    const auto a = add_person(s, Gender::Female, 12);
    const auto b = add_person(s, Gender::Male, 12);
    const auto c = add_person(s, Gender::Female, 12);
    const auto d = add_person(s, Gender::Male, 12);
    const auto cls = s.class_with_room(SchoolLevel::LowerSecondary, cohort_of(s.agent(a), 0));
    s.join_class(a, cls, 0);
    s.join_class(b, cls, 0);
    const double classmates = friendship_formation_weight(s, s.agent(a), s.agent(b));
    const double strangers = friendship_formation_weight(s, s.agent(c), s.agent(d));
    CHECK(classmates > strangers);
    CHECK(classmates == doctest::Approx(10.0 * strangers));
    CHECK(strangers == doctest::Approx(1.0));

    s.agent(d).age_months += 10 * 12;
    CHECK(friendship_formation_weight(s, s.agent(c), s.agent(d)) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("agent count bookkeeping over two years") {
    auto w = make_world(1500, 8);
    const auto initial = w.society.agents.size();
    std::size_t births = 0;
    std::size_t deaths = 0;
    for (Tick t = 0; t < 24; ++t) {
        const auto ev = step_demography(w.society, w.config.lifecycle, t, w.rng, unit_propensity);
        births += ev.births.size();
        deaths += ev.deaths.size();
        step_social(w.society, w.config.lifecycle, w.config.population, t, w.rng);
        CHECK(w.society.agents.size() == initial + births);
        CHECK(w.society.alive_count() == initial + births - deaths);
        for (auto id : ev.deaths) CHECK(total_degree(w.society, id) == 0);
    }
    for (const auto& a : w.society.agents) {
        if (!a.alive) {
            CHECK(total_degree(w.society, a.id) == 0);
            CHECK_FALSE(a.employer.has_value());
            CHECK_FALSE(a.school_class.has_value());
        }
        CHECK(a.employed == a.employer.has_value());
    }
    for (const auto& e : w.society.graph.edges(LayerId::WorkSchool)) {
        const auto& x = w.society.agent(e.source);
        const auto& y = w.society.agent(e.target);
        CHECK(((x.employer && x.employer == y.employer) || (x.school_class && x.school_class == y.school_class)));
    }
}

TEST_CASE("employment settles near the target") {
    auto w = make_world(2000, 21);
    const auto& lc = w.config.lifecycle;
    for (Tick t = 0; t < 72; ++t) {
        step_demography(w.society, lc, t, w.rng, unit_propensity);
        step_social(w.society, lc, w.config.population, t, w.rng);
        if (t >= 60) CHECK(std::abs(employment_rate(w.society) - (1.0 - lc.unemployment_target)) <= 0.02);
    }
}

TEST_CASE("lifecycle validation") {
    auto lc = default_scenario().lifecycle;
    CHECK_NOTHROW(lc.validate());
    lc.friendship_break_rate = 1.5;
    CHECK_THROWS_AS(lc.validate(), ConfigError);
}
