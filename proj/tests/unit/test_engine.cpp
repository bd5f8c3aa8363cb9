#include "ocsim/csv.hpp"
#include "ocsim/engine.hpp"

#include "support/fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace ocsim;
using ocsim::testing::add_person;
using ocsim::testing::small_scenario;

namespace {

BaselineTable flat_baseline(double p) {
    auto rows = BaselineTable::palermo().rows();
    for (auto& r : rows) {
        r.probability = p;
        r.odds_ratio = p < 1.0 ? p / (1.0 - p) : 1e12;
    }
    return BaselineTable{rows};
}

/// Quiet world: nobody dies, is born or is sanctioned.
ScenarioConfig quiet_config(int horizon) {
    auto c = small_scenario(600, horizon, 5);
    c.distributions.at("mortality_by_age_gender").bins = {{"F", 0, 200, 0.0}, {"M", 0, 200, 0.0}};
    c.distributions.at("fertility_by_age").bins = {{"F", 0, 200, 0.0}};
    c.distributions.at("punishment").bins = {{"*", 0, 200, 0.0}};
    c.sync();
    return c;
}

} // namespace

TEST_CASE("empty population gives all-zero frames") {
    auto config = quiet_config(12);
    Simulation sim{config, Society{}};
    sim.run();
    REQUIRE(sim.frames().size() == 12);
    for (const auto& f : sim.frames()) {
        CHECK(f.crimes == 0);
        CHECK(f.recruits == 0);
        CHECK(f.oc_member_count == 0);
        CHECK(f.incarcerated == 0);
        CHECK(f.alive == 0);
        CHECK(f.annualized_crime_rate_per_100k == 0.0);
        CHECK(f.mean_r == 0.0);
    }
}

TEST_CASE("zero probability means no crime") {
    auto config = quiet_config(24);
    config.crime.baseline = flat_baseline(0.0);
    Rng rng{config.seed};
    Simulation sim{config, synthesize_population(config.population, rng)};
    sim.run();
    for (const auto& f : sim.frames()) {
        CHECK(f.crimes == 0);
        CHECK(f.recruits == 0);
        CHECK(f.oc_member_count == config.population.oc_seed.member_count);
    }
    CHECK(sim.events().empty());
}

TEST_CASE("two-agent recruitment trace") {
    auto config = quiet_config(60);
    // Men 25-34 always offend; women 25-34 almost never, but can still be picked as partners.
    auto rows = flat_baseline(0.0).rows();
    rows[class_index(Gender::Male, AgeClass::From25To34)].probability = 1.0;
    rows[class_index(Gender::Male, AgeClass::From25To34)].odds_ratio = 1e12;
    rows[class_index(Gender::Female, AgeClass::From25To34)].probability = 1e-9;
    rows[class_index(Gender::Female, AgeClass::From25To34)].odds_ratio = 1e-9;
    config.crime.baseline = BaselineTable{rows};
    config.distributions.at("co_offending_size").bins = {{"1", 1, 1, 0.51}, {"2", 2, 2, 0.49}};
    config.sync();

    Society s;
    const auto boss = add_person(s, Gender::Female, 27, true);
    const auto civilian = add_person(s, Gender::Male, 27);
    s.graph.add_edge(LayerId::Friendship, boss, civilian, kSynthesisTick);
    Simulation sim{config, std::move(s)};

    bool recruited = false;
    while (!sim.done()) {
        const auto& f = sim.step();
        CHECK(f.crimes == 1);
        if (!recruited && f.recruits == 1) {
            recruited = true;
            CHECK(f.oc_member_count == 2);
            const auto& e = sim.events().back();
            CHECK(e.participants == std::vector<AgentId>{civilian, boss});
            CHECK(e.oc_involved);
            CHECK(sim.society().graph.has_edge(LayerId::OcGroup, boss, civilian));
            CHECK(sim.society().graph.has_edge(LayerId::CoOffending, boss, civilian));
        } else {
            CHECK(f.recruits == 0);
            CHECK(f.oc_member_count == (recruited ? 2u : 1u));
        }
    }
    CHECK(recruited);
    CHECK(sim.frames().size() == 60);
}

TEST_CASE("annualized crime rate formula") {
    Simulation sim{small_scenario(800, 36, 11)};
    sim.run();
    const auto& frames = sim.frames();
    REQUIRE(frames.size() == 36);
    std::size_t total = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        std::size_t trailing = 0;
        for (std::size_t k = i >= 11 ? i - 11 : 0; k <= i; ++k) trailing += frames[k].crimes;
        total += frames[i].crimes;
        const double expected = static_cast<double>(trailing) / static_cast<double>(frames[i].alive) * 100000.0;
        CHECK(frames[i].annualized_crime_rate_per_100k == expected);
        CHECK(frames[i].tick == static_cast<Tick>(i));
    }
    CHECK(total == sim.events().size());
    CHECK(total > 0);
}

TEST_CASE("frames respect basic invariants") {
    Simulation sim{small_scenario(1000, 36, 4)};
    std::size_t oc = sim.society().oc_member_count();
    while (!sim.done()) {
        const auto& f = sim.step();
        CHECK(f.oc_member_count <= oc + f.recruits);
        oc = f.oc_member_count;
        CHECK(f.oc_member_count == sim.society().oc_member_count());
        CHECK(f.incarcerated == sim.society().incarcerated_count());
        CHECK(f.alive == sim.society().alive_count());
        CHECK((f.mean_r >= 0.0 && f.mean_r <= 1.0));
        for (std::size_t c = 0; c < kClassCount; ++c) {
            const double m = f.per_class_mean_c[c];
            if (std::isnan(m)) continue;
            CHECK(std::abs(m - sim.config().crime.baseline.probability(c)) <= 0.1 + 1e-12);
        }
    }
    for (const auto& e : sim.events())
        for (auto p : e.participants) CHECK(sim.society().agent(p).age_years() >= 10);
}

TEST_CASE("determinism across repeats and thread counts") {
    const auto config = small_scenario(1200, 24, 99);
    EngineOptions one;
    EngineOptions three;
    three.threads = 3;
    Simulation a{config, one};
    Simulation b{config, one};
    Simulation c{config, three};
    a.run();
    b.run();
    c.run();
    const auto ra = a.result();
    CHECK(export_frames(ra.frames) == export_frames(b.result().frames));
    CHECK(export_frames(ra.frames) == export_frames(c.result().frames));
    CHECK(ra.edges_csv == c.result().edges_csv);
    CHECK(ra.crimes_csv == c.result().crimes_csv);
    Simulation d{small_scenario(1200, 24, 100)};
    d.run();
    CHECK(export_frames(ra.frames) != export_frames(d.result().frames));
}

TEST_CASE("policy phase without policies is neutral") {
    const auto config = small_scenario(800, 24, 12);
    EngineOptions off;
    off.policy_phase = false;
    Simulation a{config};
    Simulation b{config, off};
    a.run();
    b.run();
    CHECK(export_frames(a.frames()) == export_frames(b.frames()));
}

TEST_CASE("batches") {
    const auto config = small_scenario(600, 12, 30);
    SUBCASE("one replica summarizes to itself") {
        const auto batch = run_batch(config, 1, 1);
        REQUIRE(batch.runs.size() == 1);
        const auto& frames = batch.runs[0].frames;
        CHECK(batch.summary.size() == frames.size() * summary_metrics().size());
        for (const auto& row : batch.summary) {
            const double v = metric_value(frames.at(static_cast<std::size_t>(row.tick)), row.metric);
            CHECK(row.mean == v);
            CHECK(row.ci_low == v);
            CHECK(row.ci_high == v);
            CHECK(row.n == 1);
        }
    }
    SUBCASE("replica seeds and independence") {
        const auto batch = run_batch(config, 3, 2);
        REQUIRE(batch.runs.size() == 3);
        for (std::size_t r = 0; r < 3; ++r) {
            CHECK(batch.runs[r].seed == config.seed + r);
            auto single = config;
            single.seed = config.seed + r;
            Simulation sim{single};
            sim.run();
            CHECK(export_frames(sim.frames()) == export_frames(batch.runs[r].frames));
        }
        CHECK(export_frames(batch.runs[0].frames) != export_frames(batch.runs[1].frames));
        for (const auto& row : batch.summary) {
            CHECK(row.ci_low <= row.mean);
            CHECK(row.mean <= row.ci_high);
        }
    }
    SUBCASE("twenty replicas stay in the calibration band") {
        const auto batch = run_batch(small_scenario(500, 12, 70), 20, 2);
        std::size_t in_band = 0;
        for (const auto& run : batch.runs) {
            bool ok = true;
            for (const auto& f : run.frames)
                for (std::size_t c = 0; c < kClassCount; ++c)
                    if (!std::isnan(f.per_class_mean_c[c]))
                        ok = ok && std::abs(f.per_class_mean_c[c] - config.crime.baseline.probability(c)) <= 0.1;
            in_band += ok;
        }
        CHECK(in_band >= 19);
    }
}

TEST_CASE("run outputs") {
    auto config = small_scenario(400, 12, 2);
    Simulation sim{config};
    sim.run();
    const auto dir = std::filesystem::temp_directory_path() / "ocsim_test_run_outputs";
    std::filesystem::remove_all(dir);
    write_run_outputs(sim.result(), sim.config(), dir);
    for (const char* f : {"manifest.json", "metrics.csv", "population.csv", "edges.csv", "crimes.csv",
                          "interventions.csv"})
        CHECK(std::filesystem::exists(dir / f));
    const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    CHECK(manifest.at("scenario_hash") == sim.hash());
    CHECK(manifest.at("seed") == 2);
    CHECK(read_text_file(dir / "metrics.csv") == export_frames(sim.frames()));
}

TEST_CASE("frame serialization") {
    MetricsFrame f;
    f.tick = 3;
    f.crimes = 2;
    f.per_class_mean_c.fill(0.25);
    const auto j = to_json(f);
    CHECK(j.at("tick") == 3);
    CHECK(j.at("crimesThisTick") == 2);
    CHECK(j.at("perClassMeanC").size() == kClassCount);
    const auto csv = export_frames(std::vector<MetricsFrame>{f});
    CHECK(csv.rfind(frames_csv_header(), 0) == 0);
}
