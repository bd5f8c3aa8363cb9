#include "ocsim/engine.hpp"

#include "ocsim/csv.hpp"

#include <fmt/format.h>

#include <cmath>
#include <deque>
#include <limits>
#include <mutex>
#include <thread>

#ifndef OCSIM_VERSION
#define OCSIM_VERSION "dev"
#endif

namespace ocsim {

using nlohmann::json;

namespace {

constexpr int kRateWindow = 12;

void parallel_chunks(std::size_t n, unsigned threads, const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(1, n / 256));
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    return fmt::format("{}", v);
}

} // namespace

std::string_view code_version() noexcept { return OCSIM_VERSION; }

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    parallel_chunks(n, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

std::string frames_csv_header() {
    std::string h = "tick,crimes,annualized_crime_rate_per_100k,oc_member_count,recruits,incarcerated,mean_r,alive";
    for (std::size_t k = 0; k < kClassCount; ++k) h += ",mean_c_" + class_label(k);
    for (std::size_t k = 0; k < kPolicyKindCount; ++k)
        h += fmt::format(",interventions_{}", to_string(static_cast<PolicyKind>(k)));
    return h;
}

std::string to_csv_row(const MetricsFrame& f) {
    std::string row = fmt::format("{},{},{},{},{},{},{},{}", f.tick, f.crimes, f.annualized_crime_rate_per_100k,
                                  f.oc_member_count, f.recruits, f.incarcerated, f.mean_r, f.alive);
    for (double c : f.per_class_mean_c) row += "," + format_double(c);
    for (auto n : f.interventions) row += fmt::format(",{}", n);
    return row;
}

std::string export_frames(std::span<const MetricsFrame> frames) {
    std::string out = frames_csv_header() + "\n";
    for (const auto& f : frames) out += to_csv_row(f) + "\n";
    return out;
}

json to_json(const MetricsFrame& f) {
    json classes = json::object();
    for (std::size_t k = 0; k < kClassCount; ++k)
        classes[class_label(k)] = std::isnan(f.per_class_mean_c[k]) ? json(nullptr) : json(f.per_class_mean_c[k]);
    json interventions = json::object();
    for (std::size_t k = 0; k < kPolicyKindCount; ++k)
        interventions[std::string(to_string(static_cast<PolicyKind>(k)))] = f.interventions[k];
    return {{"tick", f.tick},
            {"crimesThisTick", f.crimes},
            {"annualizedCrimeRatePer100k", f.annualized_crime_rate_per_100k},
            {"ocMemberCount", f.oc_member_count},
            {"recruitsThisTick", f.recruits},
            {"incarceratedCount", f.incarcerated},
            {"meanR", f.mean_r},
            {"perClassMeanC", std::move(classes)},
            {"interventionCounts", std::move(interventions)},
            {"alive", f.alive}};
}

Simulation::Simulation(ScenarioConfig config, EngineOptions options)
    : config_{std::move(config)}, options_{options}, rng_{0} {
    config_.sync();
    config_.validate();
    rng_ = Rng{config_.seed};
    society_ = synthesize_population(config_.population, rng_);
    init();
}

Simulation::Simulation(ScenarioConfig config, Society society, EngineOptions options)
    : config_{std::move(config)}, options_{options}, rng_{0}, society_{std::move(society)} {
    config_.sync();
    rng_ = Rng{config_.seed};
    init();
}

void Simulation::init() {
    hash_ = scenario_hash(config_);
    policies_ = PolicyEngine{config_.policies};
    society_.graph.set_clock(kSynthesisTick);
    if (options_.record_history) society_.graph.begin_history();
    compute_probabilities();
    calibration_.tick = kSynthesisTick;
}

std::vector<AgentId> Simulation::eligible_agents() const {
    std::vector<AgentId> out;
    for (const auto& a : society_.agents)
        if (a.free() && a.age_years() >= config_.crime.minimum_age_years) out.push_back(a.id);
    return out;
}

std::vector<AgentId> Simulation::compute_probabilities() {
    auto eligible = eligible_agents();
    const auto& params = config_.crime;
    const Tick t = tick_;
    parallel_for(eligible.size(), options_.threads, [&](std::size_t i) {
        auto& a = society_.agents[eligible[i]];
        const auto mask = active_risk_factors(society_, a, t, params);
        const bool facilitator = a.employer && society_.employers[*a.employer].facilitator;
        a.p_precalibration = crime_probability(a, mask, params, facilitator, policies_.scrutiny(a.id)).annual;
    });
    calibration_ = recalibrate_classes(society_, eligible, params, t);
    return eligible;
}

double Simulation::mean_embeddedness() const {
    const auto& g = society_.graph;
    const auto n = society_.agents.size();
    const int h = config_.h;

    // R is zero outside h hops of every OC member; a multi-source BFS bounds the work.
    std::vector<int> dist(n, -1);
    std::deque<AgentId> queue;
    for (const auto& a : society_.agents)
        if (a.alive && a.oc_member && g.contains(a.id)) {
            dist[a.id] = 0;
            queue.push_back(a.id);
        }
    while (!queue.empty()) {
        const AgentId v = queue.front();
        queue.pop_front();
        if (dist[v] == h) continue;
        for (auto layer : kAllLayers)
            for (const auto& e : g.adjacency(layer, v))
                if (dist[e.id] < 0) {
                    dist[e.id] = dist[v] + 1;
                    queue.push_back(e.id);
                }
    }
    std::vector<AgentId> near;
    std::size_t free_count = 0;
    for (const auto& a : society_.agents) {
        if (!a.free()) continue;
        ++free_count;
        if (dist[a.id] >= 0) near.push_back(a.id);
    }
    if (free_count == 0) return 0.0;

    std::vector<double> r(near.size(), 0.0);
    parallel_chunks(near.size(), options_.threads, [&](std::size_t b, std::size_t e) {
        NeighborhoodScanner scanner{g};
        for (std::size_t i = b; i < e; ++i) r[i] = scanner.embeddedness(near[i], h).r;
    });
    double sum = 0.0;
    for (double x : r) sum += x;
    return sum / static_cast<double>(free_count);
}

const MetricsFrame& Simulation::step() {
    const Tick t = tick_;
    auto& g = society_.graph;
    g.set_clock(t);
    const auto& cfg = config_;

    // 1-2: demography and social dynamics
    step_demography(society_, cfg.lifecycle, t, rng_,
                    [this](Rng& r) { return sample_propensity(config_.population.propensity, r); });
    step_social(society_, cfg.lifecycle, cfg.population, t, rng_);

    // 3: policy
    if (options_.policy_phase) {
        const PolicyContext ctx{&cfg.population, cfg.h, cfg.crime.criminal_window_months};
        policies_.apply(society_, ctx, t, rng_);
    }

    // 4: probabilities and calibration
    const auto eligible = compute_probabilities();

    // 5: offenders and co-offender matching against the unmodified graph
    const auto initiators = draw_offenders(society_, eligible, rng_);
    std::vector<char> available(society_.agents.size(), 0);
    for (AgentId id : eligible) available[id] = 1;
    MatchOptions match;
    match.h = cfg.h;
    match.available = [&](AgentId id) { return id < available.size() && available[id] != 0; };
    match.hidden_from_oc = [&](AgentId id) { return policies_.scrutinized(id); };

    std::vector<CrimeEvent> tick_events;
    for (AgentId init : initiators) {
        if (!available[init]) continue;
        available[init] = 0;
        const int size = sample_group_size(cfg.crime.co_offending_size, rng_);
        auto participants = match_co_offenders(society_, init, size, match);
        for (AgentId p : participants) available[p] = 0;
        tick_events.push_back(make_event(society_, next_event_++, t, std::move(participants)));
    }

    // 6: co-offending ties and recruitment
    std::size_t recruits = 0;
    for (const auto& e : tick_events) {
        record_co_offending(e, society_);
        recruits += apply_recruitment(e, society_).size();
    }

    // 7: countdown and releases, then new sanctions
    advance_incarceration(society_, cfg.rho, rng_);
    const auto repression = [this](AgentId id) { return policies_.repression(id); };
    for (auto& e : tick_events) {
        sanction(e, society_, cfg.crime.punishment, cfg.crime.sentence_months, repression, rng_);
        for (std::size_t i = 0; i < e.participants.size(); ++i)
            if (e.sanctioned[i]) incarcerate(society_, e.participants[i], e.sentence_months[i], t);
    }

    // 8: metrics
    MetricsFrame f;
    f.tick = t;
    f.crimes = tick_events.size();
    std::size_t trailing = f.crimes;
    for (std::size_t k = 0; k + 1 < kRateWindow && k < frames_.size(); ++k) trailing += frames_[frames_.size() - 1 - k].crimes;
    f.alive = society_.alive_count();
    f.annualized_crime_rate_per_100k =
        f.alive == 0 ? 0.0 : static_cast<double>(trailing) / static_cast<double>(f.alive) * 100000.0;
    f.oc_member_count = society_.oc_member_count();
    f.recruits = recruits;
    f.incarcerated = society_.incarcerated_count();
    f.mean_r = mean_embeddedness();
    for (std::size_t k = 0; k < kClassCount; ++k) {
        const auto& c = calibration_.classes[k];
        f.per_class_mean_c[k] = c.skipped ? std::numeric_limits<double>::quiet_NaN() : c.post_mean;
    }
    f.interventions = policies_.counts_at(t);

    events_.insert(events_.end(), std::make_move_iterator(tick_events.begin()),
                   std::make_move_iterator(tick_events.end()));
    frames_.push_back(f);
    ++tick_;
    return frames_.back();
}

void Simulation::run(const std::function<bool(const MetricsFrame&)>& on_frame) {
    while (!done()) {
        const auto& f = step();
        if (on_frame && !on_frame(f)) break;
    }
}

RunResult Simulation::result() const {
    RunResult r;
    r.scenario_hash = hash_;
    r.seed = config_.seed;
    r.frames = frames_;
    r.roster_csv = export_roster(society_);
    r.edges_csv = export_edges(society_);
    r.crimes_csv = export_crime_log(events_);
    r.interventions_csv = export_interventions(policies_.records());
    return r;
}

const std::vector<std::string>& summary_metrics() {
    static const std::vector<std::string> names{"crimes",   "annualized_crime_rate_per_100k", "oc_member_count",
                                                "recruits", "incarcerated",                   "mean_r",
                                                "alive"};
    return names;
}

double metric_value(const MetricsFrame& f, std::string_view metric) {
    if (metric == "crimes") return static_cast<double>(f.crimes);
    if (metric == "annualized_crime_rate_per_100k") return f.annualized_crime_rate_per_100k;
    if (metric == "oc_member_count") return static_cast<double>(f.oc_member_count);
    if (metric == "recruits") return static_cast<double>(f.recruits);
    if (metric == "incarcerated") return static_cast<double>(f.incarcerated);
    if (metric == "mean_r") return f.mean_r;
    if (metric == "alive") return static_cast<double>(f.alive);
    throw std::invalid_argument(fmt::format("unknown metric '{}'", metric));
}

std::vector<SummaryRow> summarize(std::span<const RunResult> runs) {
    std::vector<SummaryRow> rows;
    if (runs.empty()) return rows;
    std::size_t ticks = runs.front().frames.size();
    for (const auto& r : runs) ticks = std::min(ticks, r.frames.size());
    const double n = static_cast<double>(runs.size());
    for (std::size_t t = 0; t < ticks; ++t) {
        for (const auto& m : summary_metrics()) {
            double sum = 0.0;
            for (const auto& r : runs) sum += metric_value(r.frames[t], m);
            const double mean = sum / n;
            double ss = 0.0;
            for (const auto& r : runs) ss += std::pow(metric_value(r.frames[t], m) - mean, 2);
            const double half = runs.size() > 1 ? 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
            rows.push_back({runs.front().frames[t].tick, m, mean, mean - half, mean + half, runs.size()});
        }
    }
    return rows;
}

std::string export_summary(std::span<const SummaryRow> rows) {
    std::string out = "tick,metric,mean,ci_low,ci_high,n\n";
    for (const auto& r : rows) out += fmt::format("{},{},{},{},{},{}\n", r.tick, r.metric, r.mean, r.ci_low, r.ci_high, r.n);
    return out;
}

BatchResult run_batch(const ScenarioConfig& config, std::size_t replications, unsigned jobs, EngineOptions options,
                      const std::function<void(std::size_t)>& on_replica_done) {
    if (replications < 1) throw ConfigError("replications", "must be at least 1");
    BatchResult batch;
    batch.runs.resize(replications);
    std::atomic<std::size_t> next{0};
    std::mutex done_mutex;
    std::exception_ptr failure;
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(replications)));
    if (workers > 1) options.threads = 1;

    auto work = [&] {
        for (std::size_t r = next++; r < replications; r = next++) {
            try {
                ScenarioConfig replica = config;
                replica.seed = config.seed + r;
                Simulation sim{std::move(replica), options};
                sim.run();
                batch.runs[r] = sim.result();
                std::lock_guard lock{done_mutex};
                if (on_replica_done) on_replica_done(r);
            } catch (...) {
                std::lock_guard lock{done_mutex};
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    batch.summary = summarize(batch.runs);
    return batch;
}

namespace {

json manifest(const ScenarioConfig& config, const std::string& hash, std::size_t replications,
              const std::vector<std::string>& files) {
    return {{"scenario_name", config.name},
            {"scenario_hash", hash},
            {"seed", config.seed},
            {"horizon_ticks", config.horizon_ticks},
            {"replications", replications},
            {"code_version", code_version()},
            {"files", files}};
}

} // namespace

void write_run_outputs(const RunResult& run, const ScenarioConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ScenarioConfig used = config;
    used.seed = run.seed;
    const std::vector<std::string> files{"scenario.json", "metrics.csv", "population.csv",
                                         "edges.csv",     "crimes.csv",  "interventions.csv"};
    write_text_file(dir / "manifest.json", manifest(used, run.scenario_hash, 1, files).dump(2) + "\n");
    write_text_file(dir / "scenario.json", to_json(used).dump(2) + "\n");
    write_text_file(dir / "metrics.csv", export_frames(run.frames));
    write_text_file(dir / "population.csv", run.roster_csv);
    write_text_file(dir / "edges.csv", run.edges_csv);
    write_text_file(dir / "crimes.csv", run.crimes_csv);
    write_text_file(dir / "interventions.csv", run.interventions_csv);
}

void write_batch_outputs(const BatchResult& batch, const ScenarioConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> files{"scenario.json", "summary.csv"};
    for (std::size_t r = 0; r < batch.runs.size(); ++r) {
        const auto name = fmt::format("frames_r{:03}.csv", r);
        write_text_file(dir / name, export_frames(batch.runs[r].frames));
        files.push_back(name);
    }
    write_text_file(dir / "manifest.json", manifest(config, scenario_hash(config), batch.runs.size(), files).dump(2) + "\n");
    write_text_file(dir / "scenario.json", to_json(config).dump(2) + "\n");
    write_text_file(dir / "summary.csv", export_summary(batch.summary));
}

} // namespace ocsim
