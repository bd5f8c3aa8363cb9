#include "ocsim/dynamics.hpp"
#include "ocsim/policy.hpp"
#include "ocsim/scenario.hpp"

#include "oracles/oracles.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <algorithm>

using namespace ocsim;
using ocsim::testing::add_person;

namespace {

PolicySpec spec_of(PolicyKind kind, ComponentSet components, double share = 1.0) {
    PolicySpec s;
    s.kind = kind;
    s.start_tick = 0;
    s.end_tick = 120;
    s.target_share = share;
    s.components = components;
    return s;
}

/// Mother, father and child sharing a household; the father optionally in the OC.
struct Family {
    AgentId mother, father, child;
};

Family add_family(Society& s, int child_age, bool oc_father) {
    Family f;
    f.mother = add_person(s, Gender::Female, child_age + 28);
    f.father = add_person(s, Gender::Male, child_age + 30, oc_father);
    f.child = add_person(s, Gender::Male, child_age);
    const auto hh = s.agent(f.mother).household;
    s.move_to_household(f.father, hh, kSynthesisTick);
    s.move_to_household(f.child, hh, kSynthesisTick);
    s.agent(f.child).parents = {f.mother, f.father};
    s.agent(f.mother).partner = f.father;
    s.agent(f.father).partner = f.mother;
    return f;
}

std::size_t count_records(const PolicyEngine& e, std::string_view action) {
    return static_cast<std::size_t>(
        std::count_if(e.records().begin(), e.records().end(), [&](const auto& r) { return r.action == action; }));
}

struct Ctx {
    ScenarioConfig config = default_scenario();
    PolicyContext ctx;
    Ctx() {
        ctx.population = &config.population;
        ctx.h = 2;
    }
};

} // namespace

TEST_CASE("target counts round up") {
    CHECK(target_count(0.1, 30) == 3);
    CHECK(target_count(0.1, 31) == 4);
    CHECK(target_count(0.0, 50) == 0);
    CHECK(target_count(1.0, 7) == 7);
    CHECK(target_count(0.5, 0) == 0);
}

TEST_CASE("spec validation") {
    auto s = spec_of(PolicyKind::LawEnforcement, {PolicyComponent::Scrutiny});
    CHECK_NOTHROW(s.validate("policies[0]"));
    auto bad = s;
    bad.end_tick = bad.start_tick;
    CHECK_THROWS_AS(bad.validate("policies[0]"), ConfigError);
    bad = s;
    bad.components = {PolicyComponent::ClassChange};
    CHECK_THROWS_AS(bad.validate("policies[0]"), ConfigError);
    bad = s;
    bad.repression_multiplier = 0.5;
    CHECK_THROWS_AS(bad.validate("policies[0]"), ConfigError);
    CHECK_THROWS_AS(parse_policy_kind("curfew"), ConfigError);
    for (std::size_t i = 0; i < kPolicyKindCount; ++i)
        CHECK(parse_policy_kind(to_string(static_cast<PolicyKind>(i))) == static_cast<PolicyKind>(i));
}

TEST_CASE("primary socialisation targets") {
    const auto spec = spec_of(PolicyKind::PrimarySocialisation, {PolicyComponent::TieWeakening}, 0.5);
    SUBCASE("no OC members") {
        Society s;
        add_family(s, 14, false);
        CHECK(select_primary_targets(s, spec, 2).empty());
    }
    SUBCASE("age bounds") {
        Society s;
        const auto old = add_family(s, 19, true);
        const auto young = add_family(s, 11, true);
        const auto ok = add_family(s, 12, true);
        const auto all = select_primary_targets(s, spec_of(PolicyKind::PrimarySocialisation,
                                                           {PolicyComponent::TieWeakening}, 1.0), 2);
        CHECK(all == std::vector<AgentId>{ok.child});
        (void)old;
        (void)young;
    }
    SUBCASE("higher embeddedness ranks first") {
        Society s;
        const auto low = add_family(s, 14, true);
        const auto high = add_family(s, 15, true);
        // The second child also has two OC friends.
        for (int i = 0; i < 2; ++i) {
            const auto friend_id = add_person(s, Gender::Male, 16, true);
            s.graph.add_edge(LayerId::Friendship, high.child, friend_id, 0);
        }
        const double r_low = oc_embeddedness(s.graph, low.child, 2).r;
        const double r_high = oc_embeddedness(s.graph, high.child, 2).r;
        REQUIRE(r_high > r_low);
        CHECK(select_primary_targets(s, spec, 2) == std::vector<AgentId>{high.child});
    }
    SUBCASE("parental conviction ranking") {
        Society s;
        const auto a = add_family(s, 14, true);
        const auto b = add_family(s, 15, true);
        for (int i = 0; i < 2; ++i)
            s.graph.add_edge(LayerId::Friendship, a.child, add_person(s, Gender::Male, 16, true), 0);
        s.agent(b.father).crime_history.push_back({0, 1});
        auto conv = spec;
        conv.primary_ranking = PrimaryRanking::ParentalConviction;
        CHECK(select_primary_targets(s, conv, 2) == std::vector<AgentId>{b.child});
        CHECK(select_primary_targets(s, spec, 2) == std::vector<AgentId>{a.child});
    }
}

TEST_CASE("primary socialisation components") {
    Ctx c;
    SUBCASE("full tie weakening hides the OC parent") {
        Society s;
        const auto f = add_family(s, 14, true);
        auto spec = spec_of(PolicyKind::PrimarySocialisation, {PolicyComponent::TieWeakening});
        spec.tie_weakening_factor = 1.0;
        PolicyEngine engine{{spec}};
        Rng rng{1};
        REQUIRE(oc_embeddedness(s.graph, f.child, 2).oc_weight_sum > 0.0);
        engine.apply(s, c.ctx, 0, rng);
        CHECK(oc_embeddedness(s.graph, f.child, 2).oc_weight_sum == 0.0);
        CHECK(s.graph.has_edge(LayerId::Household, f.child, f.father));
        CHECK(count_records(engine, "tie_weakened") == 1);
        // The suppression lapses with the policy.
        engine.apply(s, c.ctx, 120, rng);
        CHECK(oc_embeddedness(s.graph, f.child, 2).oc_weight_sum > 0.0);
    }
    SUBCASE("zero tie weakening changes nothing") {
        Society s;
        const auto f = add_family(s, 14, true);
        auto spec = spec_of(PolicyKind::PrimarySocialisation, {PolicyComponent::TieWeakening});
        spec.tie_weakening_factor = 0.0;
        PolicyEngine engine{{spec}};
        Rng rng{1};
        const double before = oc_embeddedness(s.graph, f.child, 2).r;
        engine.apply(s, c.ctx, 0, rng);
        CHECK(oc_embeddedness(s.graph, f.child, 2).r == before);
        CHECK(engine.records().empty());
    }
    SUBCASE("two pro-social friends") {
        Society s;
        const auto f = add_family(s, 14, true);
        for (int i = 0; i < 6; ++i) add_person(s, Gender::Female, 14);
        const auto criminal = add_person(s, Gender::Male, 14);
        s.agent(criminal).crime_history.push_back({0, 1});
        auto spec = spec_of(PolicyKind::PrimarySocialisation, {PolicyComponent::ProSocialTies});
        PolicyEngine engine{{spec}};
        Rng rng{1};
        engine.apply(s, c.ctx, 0, rng);
        const auto friends = s.graph.neighbors(LayerId::Friendship, f.child);
        CHECK(friends.size() == 2);
        for (auto fr : friends) {
            CHECK_FALSE(s.agent(fr).oc_member);
            CHECK(s.agent(fr).crime_history.empty());
        }
        CHECK(count_records(engine, "friend_added") == 2);
    }
    SUBCASE("mother job") {
        Society s;
        const auto f = add_family(s, 14, true);
        const auto firm = s.new_employer(10, false);
        s.employ(add_person(s, Gender::Male, 40), firm, 0);
        PolicyEngine engine{{spec_of(PolicyKind::PrimarySocialisation, {PolicyComponent::MotherJob})}};
        Rng rng{1};
        engine.apply(s, c.ctx, 0, rng);
        CHECK(s.agent(f.mother).employed);
        CHECK(s.graph.degree(LayerId::WorkSchool, f.mother) >= 1);
        CHECK(count_records(engine, "mother_employed") == 1);
    }
    SUBCASE("mother already employed is a recorded no-op") {
        Society s;
        const auto f = add_family(s, 14, true);
        const auto firm = s.new_employer(10, false);
        s.employ(f.mother, firm, 0);
        const auto edges = s.graph.edges(LayerId::WorkSchool);
        PolicyEngine engine{{spec_of(PolicyKind::PrimarySocialisation, {PolicyComponent::MotherJob})}};
        Rng rng{1};
        engine.apply(s, c.ctx, 0, rng);
        CHECK(s.agent(f.mother).employer == firm);
        CHECK(s.graph.edges(LayerId::WorkSchool) == edges);
        CHECK(count_records(engine, "mother_job_skipped") == 1);
    }
}

TEST_CASE("secondary socialisation targets") {
    const auto spec = spec_of(PolicyKind::SecondarySocialisation, {PolicyComponent::EducationSupport}, 0.5);
    Society s;
    SUBCASE("empty school") {
        add_person(s, Gender::Male, 30);
        CHECK(select_secondary_targets(s, spec).empty());
    }
    SUBCASE("higher probability first, five-year-olds excluded") {
        const auto a = add_person(s, Gender::Male, 9);
        const auto b = add_person(s, Gender::Male, 9);
        const auto kid = add_person(s, Gender::Male, 5);
        const auto cls = s.class_with_room(SchoolLevel::Primary, cohort_of(s.agent(a), 0));
        s.join_class(a, cls, 0);
        s.join_class(b, cls, 0);
        s.join_class(kid, s.class_with_room(SchoolLevel::Primary, cohort_of(s.agent(kid), 0)), 0);
        s.agent(a).p_annual = 0.01;
        s.agent(b).p_annual = 0.02;
        s.agent(kid).p_annual = 0.9;
        CHECK(select_secondary_targets(s, spec) == std::vector<AgentId>{b});
        auto all = spec;
        all.target_share = 1.0;
        CHECK(select_secondary_targets(s, all) == std::vector<AgentId>{b, a});
    }
}

TEST_CASE("secondary socialisation components") {
    Ctx c;
    SUBCASE("class change replaces the classmate clique") {
        Society s;
        std::vector<AgentId> pupils;
        for (int i = 0; i < 30; ++i) pupils.push_back(add_person(s, i % 2 ? Gender::Male : Gender::Female, 12));
        const int cohort = cohort_of(s.agent(pupils[0]), 0);
        for (auto p : pupils) s.join_class(p, s.class_with_room(SchoolLevel::LowerSecondary, cohort), 0);
        const auto target = pupils[0];
        const auto from = *s.agent(target).school_class;
        PolicyEngine engine{{spec_of(PolicyKind::SecondarySocialisation, {PolicyComponent::ClassChange})}};
        engine.change_class(s, 0, target, 3);
        const auto to = *s.agent(target).school_class;
        CHECK(to != from);
        for (auto n : s.graph.neighbors(LayerId::WorkSchool, target)) CHECK(s.agent(n).school_class == to);
        CHECK(s.graph.degree(LayerId::WorkSchool, target) == s.classes[to].members.size() - 1);
        CHECK(s.classes[to].level == SchoolLevel::LowerSecondary);
        CHECK(s.classes[to].cohort == cohort);
    }
    SUBCASE("education support yields a diploma at 19") {
        Society s;
        const auto p = add_person(s, Gender::Female, 18);
        s.agent(p).age_months += 11;
        s.join_class(p, s.class_with_room(SchoolLevel::UpperSecondary, cohort_of(s.agent(p), 0)), 0);
        PolicyEngine engine{{spec_of(PolicyKind::SecondarySocialisation, {PolicyComponent::EducationSupport})}};
        engine.pin_education(s, 0, p, 0);
        auto lc = default_scenario().lifecycle;
        lc.high_school_completion = 0.0;
        Rng rng{4};
        s.agent(p).age_months += 1;
        step_schooling(s, lc, 1, rng, 1.0);
        CHECK(s.agent(p).education >= Education::HighSchool);
        CHECK_FALSE(s.agent(p).school_class.has_value());
        CHECK(active_risk_factors(s, s.agent(p), 1, default_scenario().crime).test(RiskFactor::Education));
    }
    SUBCASE("child job at the 16th birthday") {
        Society s;
        const auto f = add_family(s, 15, false);
        s.agent(f.child).age_months = 16 * 12 - 2;
        s.join_class(f.child, s.class_with_room(SchoolLevel::UpperSecondary, cohort_of(s.agent(f.child), 0)), 0);
        const auto firm = s.new_employer(10, false);
        s.employ(add_person(s, Gender::Female, 40), firm, 0);
        PolicyEngine engine{{spec_of(PolicyKind::SecondarySocialisation, {PolicyComponent::ChildJob})}};
        Rng rng{5};
        for (Tick t = 0; t < 4; ++t) {
            engine.apply(s, c.ctx, t, rng);
            const bool sixteen = s.agent(f.child).age_years() >= 16;
            CHECK(s.agent(f.child).employed == sixteen);
            if (sixteen) CHECK(s.graph.degree(LayerId::WorkSchool, f.child) >= 1);
            ++s.agent(f.child).age_months;
        }
        CHECK(count_records(engine, "child_job_scheduled") == 1);
        CHECK(count_records(engine, "child_employed") == 1);
    }
    SUBCASE("pro-social ties drop criminal friends") {
        Society s;
        const auto kid = add_person(s, Gender::Male, 13);
        s.join_class(kid, s.class_with_room(SchoolLevel::LowerSecondary, cohort_of(s.agent(kid), 0)), 0);
        std::vector<AgentId> bad;
        for (int i = 0; i < 3; ++i) {
            bad.push_back(add_person(s, Gender::Male, 15));
            s.agent(bad.back()).crime_history.push_back({0, EventId(i)});
            s.graph.add_edge(LayerId::Friendship, kid, bad.back(), 0);
        }
        for (int i = 0; i < 4; ++i) add_person(s, Gender::Female, 13);
        PolicyEngine engine{{spec_of(PolicyKind::SecondarySocialisation, {PolicyComponent::ProSocialTies})}};
        Rng rng{2};
        engine.apply(s, c.ctx, 0, rng);
        std::size_t still_bad = 0;
        for (auto b : bad) still_bad += s.graph.has_edge(LayerId::Friendship, kid, b);
        CHECK(still_bad == 1);
        CHECK(count_records(engine, "tie_removed") == 2);
        CHECK(count_records(engine, "friend_added") == 2);
    }
}

TEST_CASE("law enforcement targets") {
    SUBCASE("star centre") {
        Society s;
        const auto centre = add_person(s, Gender::Male, 40, true);
        for (int i = 0; i < 6; ++i)
            s.graph.add_edge(LayerId::OcGroup, centre, add_person(s, Gender::Male, 30, true), 0);
        auto spec = spec_of(PolicyKind::LawEnforcement, {PolicyComponent::Scrutiny}, 0.1);
        CHECK(select_le_targets(s, spec) == std::vector<AgentId>{centre});
    }
    SUBCASE("no facilitator firms") {
        Society s;
        const auto firm = s.new_employer(5, false);
        s.employ(add_person(s, Gender::Male, 40), firm, 0);
        auto spec = spec_of(PolicyKind::LawEnforcement, {PolicyComponent::Scrutiny});
        spec.le_target = LeTargetMode::Facilitators;
        CHECK(select_le_targets(s, spec).empty());
        const auto fac = s.new_employer(5, true);
        const auto worker = add_person(s, Gender::Female, 35);
        s.employ(worker, fac, 0);
        CHECK(select_le_targets(s, spec) == std::vector<AgentId>{worker});
    }
    SUBCASE("ranking agrees with the brute-force oracle on 30-node OC graphs") {
        Rng rng{17};
        for (int trial = 0; trial < 10; ++trial) {
            Society s;
            std::vector<AgentId> members;
            for (int i = 0; i < 30; ++i) members.push_back(add_person(s, Gender::Male, 30, true));
            for (int i = 0; i < 5; ++i) add_person(s, Gender::Female, 30);
            for (int k = 0; k < 45; ++k) {
                const auto a = members[rng.index(30)];
                const auto b = members[rng.index(30)];
                if (a != b) s.graph.add_edge(rng.bernoulli(0.5) ? LayerId::OcGroup : LayerId::CoOffending, a, b, 0);
            }
            // a friendship shortcut must not count
            s.graph.add_edge(LayerId::Friendship, members[0], members[29], 0);
            const auto oracle =
                oracle::betweenness(s.graph, LayerMask{LayerId::OcGroup, LayerId::CoOffending}, members);
            const auto targets = select_le_targets(s, spec_of(PolicyKind::LawEnforcement, {PolicyComponent::Scrutiny}));
            REQUIRE(targets.size() == 30);
            for (std::size_t i = 0; i + 1 < targets.size(); ++i) {
                const double x = oracle.at(targets[i]);
                const double y = oracle.at(targets[i + 1]);
                CHECK(x >= y - 1e-9);
                if (std::abs(x - y) <= 1e-12) CHECK(targets[i] < targets[i + 1]);
            }
            const auto top3 = select_le_targets(s, spec_of(PolicyKind::LawEnforcement, {PolicyComponent::Scrutiny}, 0.1));
            CHECK(top3 == std::vector<AgentId>(targets.begin(), targets.begin() + 3));
        }
    }
}

TEST_CASE("scrutiny and repression apply to targets only") {
    Ctx c;
    Society s;
    const auto centre = add_person(s, Gender::Male, 40, true);
    std::vector<AgentId> leaves;
    for (int i = 0; i < 4; ++i) {
        leaves.push_back(add_person(s, Gender::Male, 30, true));
        s.graph.add_edge(LayerId::OcGroup, centre, leaves.back(), 0);
    }
    auto a = spec_of(PolicyKind::LawEnforcement, {PolicyComponent::Scrutiny, PolicyComponent::Repression}, 0.2);
    a.scrutiny_factor = 0.5;
    a.repression_multiplier = 3.0;
    auto b = a;
    b.components = {PolicyComponent::Scrutiny};
    b.scrutiny_factor = 0.4;
    b.start_tick = 12;
    PolicyEngine engine{{a, b}};
    Rng rng{1};
    engine.apply(s, c.ctx, 0, rng);
    CHECK(engine.scrutiny(centre) == 0.5);
    CHECK(engine.repression(centre) == 3.0);
    CHECK(engine.scrutinized(centre));
    for (auto l : leaves) {
        CHECK(engine.scrutiny(l) == 1.0);
        CHECK(engine.repression(l) == 1.0);
        CHECK_FALSE(engine.scrutinized(l));
    }
    CHECK(engine.counts_at(0)[static_cast<std::size_t>(PolicyKind::LawEnforcement)] == 2);
    engine.apply(s, c.ctx, 12, rng);
    CHECK(engine.scrutiny(centre) == doctest::Approx(0.2));
    engine.apply(s, c.ctx, 120, rng);
    CHECK(engine.scrutiny(centre) == 1.0);
    CHECK(engine.repression(centre) == 1.0);

    // Effective probability under scrutiny 0.5.
    Agent agent;
    agent.gender = Gender::Male;
    agent.age_months = 40 * 12;
    const auto prm = default_scenario().crime;
    const double p = crime_probability(agent, {}, prm).annual;
    CHECK(crime_probability(agent, {}, prm, false, 0.5).annual == doctest::Approx(p / 2));
}

TEST_CASE("repression caps at one") {
    Society s;
    const auto id = add_person(s, Gender::Male, 30, true);
    DistributionTable punishment{"punishment", DistributionKind::ScalarRate, "", {{"*", 0, 200, 0.3}}};
    DistributionTable sentence{"sentence_months", DistributionKind::Categorical, "", {{"", 6, 6, 1.0}}};
    Rng rng{8};
    for (int i = 0; i < 200; ++i) {
        auto e = make_event(s, i, 0, {id});
        sanction(e, s, punishment, sentence, [](AgentId) { return 100.0; }, rng);
        CHECK(e.sanctioned[0]);
    }
}

TEST_CASE("audit trail covers every graph mutation") {
    Ctx c;
    auto world = ocsim::testing::small_scenario(800, 24, 3);
    Rng rng{3};
    Society s = synthesize_population(world.population, rng);
    for (auto& a : s.agents) a.p_annual = rng.uniform() * 0.1;
    auto prim = spec_of(PolicyKind::PrimarySocialisation,
                        {PolicyComponent::TieWeakening, PolicyComponent::ProSocialTies, PolicyComponent::MotherJob});
    prim.tie_weakening_factor = 1.0;
    auto sec = spec_of(PolicyKind::SecondarySocialisation,
                       {PolicyComponent::ClassChange, PolicyComponent::SocialActivities}, 0.05);
    PolicyEngine engine{{prim, sec}};
    const auto before = s.graph.edges(LayerId::Friendship).size();
    engine.apply(s, c.ctx, 0, rng);
    const auto added = s.graph.edges(LayerId::Friendship).size() - before;
    CHECK(added == count_records(engine, "friend_added"));
    CHECK(count_records(engine, "class_changed") + count_records(engine, "class_change_skipped") ==
          engine.targets(1).size());
    std::size_t suppressed = 0;
    for (const auto& a : s.agents) suppressed += s.graph.suppressed_contacts(a.id).size();
    CHECK(suppressed == count_records(engine, "tie_weakened"));

    const auto csv = export_interventions(engine.records());
    CHECK(csv.rfind("tick,policy,kind,target,action,detail\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == engine.records().size() + 1);
}
