#pragma once

#include "ocsim/crime.hpp"
#include "ocsim/policy.hpp"
#include "ocsim/scenario.hpp"
#include "ocsim/society.hpp"

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ocsim {

struct MetricsFrame {
    Tick tick = 0;
    std::size_t crimes = 0;
    /// Crimes over the trailing 12 ticks per 100000 alive agents.
    double annualized_crime_rate_per_100k = 0.0;
    std::size_t oc_member_count = 0;
    std::size_t recruits = 0;
    std::size_t incarcerated = 0;
    /// Mean embeddedness over free agents.
    double mean_r = 0.0;
    /// Post-calibration mean annual C per class; NaN for classes without eligible agents.
    std::array<double, kClassCount> per_class_mean_c{};
    std::array<std::size_t, kPolicyKindCount> interventions{};
    std::size_t alive = 0;

    bool operator==(const MetricsFrame&) const = default;
};

std::string frames_csv_header();
std::string to_csv_row(const MetricsFrame& f);
std::string export_frames(std::span<const MetricsFrame> frames);
/// Camel-cased fields as served to the dashboard.
nlohmann::json to_json(const MetricsFrame& f);

struct EngineOptions {
    /// Runs the policy phase; with no policy specs it has no effect.
    bool policy_phase = true;
    /// Worker threads for the read-only per-agent phases.
    unsigned threads = 1;
    /// Keep the edge change log (needed for network snapshots at past ticks).
    bool record_history = false;
};

struct RunResult {
    std::string scenario_hash;
    std::uint64_t seed = 0;
    std::vector<MetricsFrame> frames;
    std::string roster_csv;
    std::string edges_csv;
    std::string crimes_csv;
    std::string interventions_csv;
};

/// One replica: synthesized society plus the per-tick phase pipeline.
class Simulation {
public:
    explicit Simulation(ScenarioConfig config, EngineOptions options = {});
    /// Runs on a given society instead of synthesizing one.
    Simulation(ScenarioConfig config, Society society, EngineOptions options = {});

    /// Advances one tick: demography, social dynamics, policy, probabilities and
    /// calibration, offending and matching, recruitment, sanctions and releases, metrics.
    const MetricsFrame& step();
    bool done() const noexcept { return tick_ >= config_.horizon_ticks; }
    Tick tick() const noexcept { return tick_; }

    /// Steps to the horizon; `on_frame` returning false stops early.
    void run(const std::function<bool(const MetricsFrame&)>& on_frame = {});

    const ScenarioConfig& config() const noexcept { return config_; }
    const std::string& hash() const noexcept { return hash_; }
    Society& society() noexcept { return society_; }
    const Society& society() const noexcept { return society_; }
    const std::vector<MetricsFrame>& frames() const noexcept { return frames_; }
    const std::vector<CrimeEvent>& events() const noexcept { return events_; }
    const PolicyEngine& policies() const noexcept { return policies_; }
    PolicyEngine& policies() noexcept { return policies_; }
    const CalibrationState& calibration() const noexcept { return calibration_; }
    Rng& rng() noexcept { return rng_; }

    /// Phase 4 on its own: factors, pre-calibration p and class calibration for every eligible agent.
    /// Returns the eligible agents.
    std::vector<AgentId> compute_probabilities();
    /// Alive, free agents at or above the minimum criminal age, in id order.
    std::vector<AgentId> eligible_agents() const;
    /// Mean R over free agents.
    double mean_embeddedness() const;

    RunResult result() const;

private:
    void init();

    ScenarioConfig config_;
    EngineOptions options_;
    std::string hash_;
    Rng rng_;
    Society society_;
    PolicyEngine policies_;
    CalibrationState calibration_;
    std::vector<MetricsFrame> frames_;
    std::vector<CrimeEvent> events_;
    EventId next_event_ = 1;
    Tick tick_ = 0;
};

/// Runs fn(i) for i in [0, n) on up to `threads` threads; fn must only touch index-local state.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

struct SummaryRow {
    Tick tick;
    std::string metric;
    double mean;
    double ci_low;
    double ci_high;
    std::size_t n;
};

struct BatchResult {
    std::vector<RunResult> runs;
    std::vector<SummaryRow> summary;
};

/// Scalar metrics summarized by batches and compared by reports.
const std::vector<std::string>& summary_metrics();
double metric_value(const MetricsFrame& f, std::string_view metric);

/// Mean and 95% normal interval per metric and tick across runs.
std::vector<SummaryRow> summarize(std::span<const RunResult> runs);
std::string export_summary(std::span<const SummaryRow> rows);

/// Replica r uses seed base + r; replicas run on up to `jobs` threads.
BatchResult run_batch(const ScenarioConfig& config, std::size_t replications, unsigned jobs,
                      EngineOptions options = {}, const std::function<void(std::size_t)>& on_replica_done = {});

/// Writes manifest.json, metrics.csv, population.csv, edges.csv, crimes.csv and interventions.csv.
void write_run_outputs(const RunResult& run, const ScenarioConfig& config, const std::filesystem::path& dir);
/// Writes manifest.json, frames_rNNN.csv per replica and summary.csv.
void write_batch_outputs(const BatchResult& batch, const ScenarioConfig& config, const std::filesystem::path& dir);

std::string_view code_version() noexcept;

} // namespace ocsim
