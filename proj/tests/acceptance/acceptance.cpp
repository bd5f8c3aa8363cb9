// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "ocsim/engine.hpp"

#include "oracles/oracles.hpp"
#include "support/fixtures.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <iostream>
#include <set>

using namespace ocsim;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int number, std::string_view title, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << fmt::format("{} {:>2} {} ({}; {:.1f}s)", o.pass ? "PASS" : "FAIL", number, title, o.detail, secs)
              << std::endl;
}

MultiplexGraph random_multiplex(Rng& rng, std::size_t n) {
    MultiplexGraph g{n};
    const double density = 0.01 + 0.12 * rng.uniform();
    for (auto l : kAllLayers)
        for (AgentId a = 0; a < n; ++a)
            for (AgentId b = a + 1; b < n; ++b)
                if (rng.bernoulli(density)) g.add_edge(l, a, b, 0);
    for (AgentId v = 0; v < n; ++v) {
        g.set_oc_member(v, rng.bernoulli(0.25));
        if (rng.bernoulli(0.05)) g.set_active(v, false);
    }
    return g;
}

std::set<std::tuple<int, AgentId, Tick>> non_household_ties(const Society& s, AgentId id) {
    std::set<std::tuple<int, AgentId, Tick>> out;
    for (auto l : kAllLayers) {
        if (l == LayerId::Household) continue;
        for (const auto& e : s.graph.adjacency(l, id)) out.insert({static_cast<int>(l), e.id, e.created});
    }
    return out;
}

ScenarioConfig default_with_horizon(int horizon) {
    auto c = default_scenario();
    c.horizon_ticks = horizon;
    return c;
}

// Criteria 3 and 4 share one long run.
struct BandRun {
    std::vector<MetricsFrame> frames;
    BaselineTable baseline = BaselineTable::palermo();
};

const BandRun& band_run() {
    static const BandRun run = [] {
        BandRun r;
        const auto config = default_with_horizon(144);
        r.baseline = config.crime.baseline;
        Simulation sim{config};
        sim.run();
        r.frames = sim.frames();
        return r;
    }();
    return run;
}

constexpr Tick kBurnIn = 24;

} // namespace

int main() {
    report(1, "baseline table odds consistency", [] {
        const auto t = BaselineTable::palermo();
        double worst = 0.0;
        for (const auto& row : t.rows())
            worst = std::max(worst, std::abs(row.odds_ratio - row.probability / (1.0 - row.probability)));
        const auto& m1824 = t.rows()[class_index(Gender::Male, AgeClass::From18To24)];
        const bool ok = worst <= 5e-4 && m1824.probability == 0.3019 && m1824.odds_ratio == 0.4324;
        return Outcome{ok, fmt::format("16 rows, max |OR - p/(1-p)| = {:.2e}", worst)};
    });

    report(2, "single-factor worked example", [] {
        auto specs = RiskFactorSet::standard().specs();
        specs[static_cast<std::size_t>(RiskFactor::Unemployment)].odds_ratio = 1.41;
        const double p = raw_annual_probability(0.15, {RiskFactor::Unemployment}, RiskFactorSet{specs});
        return Outcome{p == 0.2115, fmt::format("p = {:.17g}", p)};
    });

    report(3, "per-class mean C inside the calibration band", [] {
        const auto& run = band_run();
        double worst = 0.0;
        std::size_t samples = 0;
        for (const auto& f : run.frames) {
            if (f.tick < kBurnIn) continue;
            for (std::size_t c = 0; c < kClassCount; ++c) {
                if (std::isnan(f.per_class_mean_c[c])) continue;
                worst = std::max(worst, std::abs(f.per_class_mean_c[c] - run.baseline.probability(c)));
                ++samples;
            }
        }
        const bool ok = worst <= 0.1 && samples >= 120 * (kClassCount - 2);
        return Outcome{ok, fmt::format("10000 agents, ticks 24-143, {} class samples, max deviation {:.4f}",
                                       samples, worst)};
    });

    report(4, "first-half vs second-half class means", [] {
        const auto& run = band_run();
        const Tick mid = kBurnIn + 60;
        double worst = 0.0;
        std::size_t compared = 0;
        for (std::size_t c = 0; c < kClassCount; ++c) {
            double s1 = 0, s2 = 0;
            int n1 = 0, n2 = 0;
            for (const auto& f : run.frames) {
                if (f.tick < kBurnIn || std::isnan(f.per_class_mean_c[c])) continue;
                (f.tick < mid ? s1 : s2) += f.per_class_mean_c[c];
                ++(f.tick < mid ? n1 : n2);
            }
            if (n1 == 0 || n2 == 0) continue;
            worst = std::max(worst, std::abs(s1 / n1 - s2 / n2));
            ++compared;
        }
        return Outcome{worst <= 0.1 && compared == kClassCount,
                       fmt::format("{} classes, max half-to-half difference {:.4f}", compared, worst)};
    });

    report(5, "embeddedness matches the exhaustive oracle", [] {
        Rng rng{2024};
        double worst = 0.0;
        std::size_t checks = 0;
        bool bounded = true;
        for (int graph = 0; graph < 1000; ++graph) {
            const auto n = static_cast<std::size_t>(rng.between(2, 50));
            const auto g = random_multiplex(rng, n);
            NeighborhoodScanner scanner{g};
            for (int k = 0; k < 6; ++k) {
                const auto ego = static_cast<AgentId>(rng.index(n));
                if (!g.active(ego)) continue;
                const int h = static_cast<int>(rng.between(1, 3));
                const auto lib = scanner.embeddedness(ego, h);
                const auto ref = oracle::embeddedness(g, ego, h);
                worst = std::max({worst, std::abs(lib.r - ref.r), std::abs(lib.total_weight_sum - ref.total)});
                bounded = bounded && lib.r >= 0.0 && lib.r <= 1.0;
                ++checks;
            }
        }
        return Outcome{worst <= 1e-12 && bounded,
                       fmt::format("1000 graphs, {} ego/h checks, max |diff| {:.1e}", checks, worst)};
    });

    report(6, "betweenness ranking matches the brute-force oracle", [] {
        Rng rng{77};
        std::size_t mismatched = 0;
        double worst = 0.0;
        for (int graph = 0; graph < 200; ++graph) {
            const auto n = static_cast<std::size_t>(rng.between(3, 30));
            const auto g = random_multiplex(rng, n);
            LayerMask layers;
            for (auto l : kAllLayers)
                if (rng.bernoulli(0.5)) layers.insert(l);
            if (layers.empty()) layers.insert(LayerId::OcGroup);
            std::vector<AgentId> nodes;
            for (AgentId v = 0; v < n; ++v)
                if (rng.bernoulli(0.85)) nodes.push_back(v);
            const auto lib = betweenness(g, layers, nodes);
            const auto ref = oracle::betweenness(g, layers, nodes);
            for (const auto& [id, s] : ref) worst = std::max(worst, std::abs(lib.at(id) - s));
            mismatched += oracle::ranking(lib, 1e-9) != oracle::ranking(ref, 1e-9);
        }
        return Outcome{mismatched == 0 && worst <= 1e-9,
                       fmt::format("200 graphs, {} ranking mismatches, max score diff {:.1e}", mismatched, worst)};
    });

    report(7, "recruitment rule over generated events", [] {
        Rng rng{7};
        std::size_t events = 0, violations = 0, recruits = 0;
        for (int trial = 0; trial < 200; ++trial) {
            Society s = testing::make_society(40);
            for (auto& a : s.agents) s.set_oc_member(a.id, rng.bernoulli(0.15));
            for (int k = 0; k < 30; ++k) {
                std::vector<AgentId> party;
                const auto size = rng.between(1, 4);
                while (party.size() < size) {
                    const auto id = static_cast<AgentId>(rng.index(s.agents.size()));
                    if (std::find(party.begin(), party.end(), id) == party.end()) party.push_back(id);
                }
                std::vector<bool> before;
                for (const auto& a : s.agents) before.push_back(a.oc_member);
                const auto e = make_event(s, static_cast<EventId>(++events), 0, party);
                record_co_offending(e, s);
                recruits += apply_recruitment(e, s).size();
                if (e.oc_involved) {
                    for (auto p : party) violations += !s.agent(p).oc_member;
                }
                for (const auto& a : s.agents) {
                    const bool in_party = std::find(party.begin(), party.end(), a.id) != party.end();
                    if ((!e.oc_involved || !in_party) && a.oc_member != before[a.id]) ++violations;
                }
            }
        }
        return Outcome{violations == 0 && recruits > 0,
                       fmt::format("{} events, {} recruits, {} violations", events, recruits, violations)};
    });

    report(8, "incarceration round trip", [] {
        std::size_t violations = 0, checked = 0, restored_at_zero = 0;
        auto config = testing::small_scenario(1500, 36, 13);
        Rng rng{config.seed};
        Society s = synthesize_population(config.population, rng);
        for (int k = 0; k < 300; ++k) {
            const auto id = static_cast<AgentId>(rng.index(s.agents.size()));
            if (!s.agent(id).free()) continue;
            const auto before = non_household_ties(s, id);
            const auto household = s.graph.neighbors(LayerId::Household, id);
            std::vector<AgentId> contacts;
            for (auto l : kAllLayers)
                for (auto v : s.graph.neighbors(l, id)) contacts.push_back(v);
            incarcerate(s, id, 6, 0);
            for (auto v : contacts) {
                const auto nb = h_hop_neighborhood(s.graph, v, 3);
                violations += std::any_of(nb.members.begin(), nb.members.end(), [&](const auto& m) { return m.id == id; });
                const auto field = proximity_field(s.graph, v, 3);
                violations += std::any_of(field.begin(), field.end(), [&](const auto& p) { return p.first == id; });
            }
            const double rho = k % 2 == 0 ? 1.0 : 0.0;
            release(s, id, rho, rng);
            const auto after = non_household_ties(s, id);
            if (rho == 1.0) {
                violations += after != before;
            } else if (!s.agent(id).oc_member) {
                restored_at_zero += after.size();
            }
            violations += s.graph.neighbors(LayerId::Household, id) != household;
            ++checked;
        }

        // Prisoners take part in no crime while inside.
        auto run_config = testing::small_scenario(1500, 36, 14);
        run_config.distributions.at("punishment").bins = {{"*", 0, 200, 0.5}};
        run_config.sync();
        Simulation sim{run_config};
        std::size_t prisoner_ticks = 0;
        while (!sim.done()) {
            std::set<AgentId> inside;
            for (const auto& a : sim.society().agents)
                if (a.incarcerated()) inside.insert(a.id);
            prisoner_ticks += inside.size();
            const auto before = sim.events().size();
            sim.step();
            for (std::size_t i = before; i < sim.events().size(); ++i)
                for (auto p : sim.events()[i].participants) violations += inside.count(p);
        }
        const bool ok = violations == 0 && restored_at_zero == 0 && prisoner_ticks > 0;
        return Outcome{ok, fmt::format("{} agents cycled, {} prisoner-ticks in a run, {} violations", checked,
                                       prisoner_ticks, violations)};
    });

    report(9, "scrutiny and repression exactness", [] {
        auto base = testing::small_scenario(2000, 12, 31);
        auto treated = base;
        PolicySpec le;
        le.kind = PolicyKind::LawEnforcement;
        le.start_tick = 0;
        le.end_tick = 12;
        le.target_share = 0.2;
        le.components = {PolicyComponent::Scrutiny};
        le.scrutiny_factor = 0.37;
        treated.policies = {le};
        Simulation a{base};
        Simulation b{treated};
        a.step();
        b.step();
        const auto& targets = b.policies().targets(0);
        const std::set<AgentId> target_set(targets.begin(), targets.end());
        std::size_t mismatched = 0;
        for (const auto& agent : a.society().agents) {
            const double untreated = agent.p_precalibration;
            const double got = b.society().agent(agent.id).p_precalibration;
            const double want = target_set.count(agent.id) ? 0.37 * untreated : untreated;
            mismatched += std::memcmp(&got, &want, sizeof got) != 0;
        }

        // Repression: frequency of sanction over 10^4 events.
        Society s = testing::make_society(1);
        DistributionTable punishment{"punishment", DistributionKind::ScalarRate, "", {{"*", 0, 200, 0.3}}};
        DistributionTable sentence{"sentence_months", DistributionKind::Categorical, "", {{"", 6, 6, 1.0}}};
        Rng rng{99};
        std::string freq;
        bool freq_ok = true;
        for (double m : {1.0, 2.0, 5.0}) {
            const double expected = std::min(1.0, m * 0.3);
            int hits = 0;
            for (int i = 0; i < 10000; ++i) {
                auto e = make_event(s, i, 0, {0});
                sanction(e, s, punishment, sentence, [m](AgentId) { return m; }, rng);
                hits += e.sanctioned[0];
            }
            const double sigma = std::sqrt(10000.0 * expected * (1.0 - expected));
            const double dev = std::abs(hits - 10000.0 * expected);
            freq_ok = freq_ok && (sigma == 0.0 ? dev == 0.0 : dev <= 3.0 * sigma);
            freq += fmt::format(" m={}:{}/10000", m, hits);
        }
        const bool ok = mismatched == 0 && !targets.empty() && freq_ok;
        return Outcome{ok, fmt::format("{} targets, {} pre-calibration mismatches,{}", targets.size(), mismatched,
                                       freq)};
    });

    // Criteria 10 and 11 use the default scenario at a shortened horizon.
    const int horizon = 48;
    std::string reference;
    report(10, "determinism across repeats and thread counts", [&] {
        const auto config = default_with_horizon(horizon);
        std::vector<std::string> outputs;
        for (unsigned threads : {1u, 1u, 4u}) {
            EngineOptions opts;
            opts.threads = threads;
            Simulation sim{config, opts};
            sim.run();
            outputs.push_back(export_frames(sim.frames()));
        }
        reference = outputs[0];
        const bool ok = outputs[0] == outputs[1] && outputs[0] == outputs[2];
        return Outcome{ok, fmt::format("default scenario, {} ticks, jobs 1/1/4, {} bytes each", horizon,
                                       outputs[0].size())};
    });

    report(11, "no-policy neutrality", [&] {
        const auto config = default_with_horizon(horizon);
        EngineOptions off;
        off.policy_phase = false;
        Simulation sim{config, off};
        sim.run();
        if (reference.empty()) {
            Simulation on{config};
            on.run();
            reference = export_frames(on.frames());
        }
        const bool ok = export_frames(sim.frames()) == reference;
        return Outcome{ok, fmt::format("default scenario, {} ticks, policy phase on vs off", horizon)};
    });

    return failures == 0 ? 0 : 1;
}
