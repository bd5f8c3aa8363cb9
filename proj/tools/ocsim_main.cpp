#include "ocsim/csv.hpp"
#include "ocsim/engine.hpp"
#include "ocsim/report.hpp"
#include "ocsim/service.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kConfigError = 2;
constexpr int kUsageError = 3;

std::filesystem::path output_root() {
    if (const char* env = std::getenv("OCSIM_OUTPUT_ROOT"); env && *env) return env;
    return "ocsim-out";
}

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Options {
    std::string scenario;
    std::string out;
    std::size_t replications = 1;
    std::optional<std::uint64_t> seed;
    unsigned jobs = default_jobs();
    bool quiet = false;
    bool no_policy_phase = false;
    std::vector<std::string> report_dirs;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string store = "ocsim-store";
    std::string data_root = ".";
    unsigned workers = 2;
};

ocsim::ScenarioConfig load(const Options& o) {
    auto config = ocsim::load_scenario(o.scenario);
    if (o.seed) config.seed = *o.seed;
    return config;
}

std::filesystem::path out_dir(const Options& o, const ocsim::ScenarioConfig& config, std::string_view kind) {
    if (!o.out.empty()) return o.out;
    return output_root() / fmt::format("{}-{}-seed{}", config.name, kind, config.seed);
}

void print_summary(std::span<const ocsim::MetricsFrame> frames, const std::filesystem::path& dir) {
    if (frames.empty()) return;
    std::size_t recruits = 0;
    double rate = 0.0;
    for (const auto& f : frames) {
        recruits += f.recruits;
        rate += f.annualized_crime_rate_per_100k;
    }
    std::cout << fmt::format("final OC size: {}\ntotal recruits: {}\nmean crime rate per 100k: {:.2f}\noutput: {}\n",
                             frames.back().oc_member_count, recruits, rate / static_cast<double>(frames.size()),
                             dir.string());
}

int cmd_validate(const Options& o) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(ocsim::read_text_file(o.scenario));
    } catch (const nlohmann::json::parse_error& e) {
        std::cerr << fmt::format("{}: malformed JSON: {}\n", o.scenario, e.what());
        return kConfigError;
    }
    const auto diags = ocsim::validate_scenario(doc, std::filesystem::path(o.scenario).parent_path());
    for (const auto& d : diags) std::cerr << (d.path.empty() ? d.message : d.path + ": " + d.message) << '\n';
    if (!diags.empty()) return kConfigError;
    std::cout << "valid\n";
    return kOk;
}

int cmd_run(const Options& o) {
    auto config = load(o);
    ocsim::EngineOptions opts;
    opts.policy_phase = !o.no_policy_phase;
    opts.threads = o.jobs;
    ocsim::Simulation sim{config, opts};
    sim.run([&](const ocsim::MetricsFrame& f) {
        if (!o.quiet && (f.tick + 1) % 12 == 0)
            std::cerr << fmt::format("tick {}/{}\n", f.tick + 1, config.horizon_ticks);
        return true;
    });
    const auto dir = out_dir(o, sim.config(), "run");
    const auto result = sim.result();
    ocsim::write_run_outputs(result, sim.config(), dir);
    if (!o.quiet) print_summary(result.frames, dir);
    return kOk;
}

int cmd_batch(const Options& o) {
    auto config = load(o);
    ocsim::EngineOptions opts;
    opts.policy_phase = !o.no_policy_phase;
    std::atomic<std::size_t> done{0};
    const auto batch = ocsim::run_batch(config, o.replications, o.jobs, opts, [&](std::size_t) {
        const auto n = ++done;
        if (!o.quiet) std::cerr << fmt::format("replica {}/{} done\n", n, o.replications);
    });
    const auto dir = out_dir(o, config, "batch");
    ocsim::write_batch_outputs(batch, config, dir);
    if (!o.quiet) print_summary(batch.runs.front().frames, dir);
    return kOk;
}

int cmd_report(const Options& o) {
    const auto treatment = ocsim::read_metric_series(o.report_dirs.at(0));
    const auto baseline = ocsim::read_metric_series(o.report_dirs.at(1));
    const std::filesystem::path dir = o.out.empty() ? output_root() / "report" : std::filesystem::path(o.out);
    std::filesystem::create_directories(dir);
    ocsim::write_text_file(dir / "difference.csv", ocsim::difference_report(treatment, baseline));
    if (!o.quiet) std::cout << fmt::format("output: {}\n", (dir / "difference.csv").string());
    return kOk;
}

ocsim::Service* g_service = nullptr;

int cmd_serve(const Options& o) {
    ocsim::ServiceOptions so;
    so.store = o.store;
    so.data_root = o.data_root;
    so.workers = o.workers;
    ocsim::Service service{so};
    g_service = &service;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
    });
    if (!o.quiet) std::cerr << fmt::format("listening on {}:{}\n", o.host, o.port);
    const bool ok = service.listen(o.host, o.port);
    g_service = nullptr;
    if (!ok) {
        std::cerr << fmt::format("cannot listen on {}:{}\n", o.host, o.port);
        return kRuntimeError;
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Organized-crime recruitment simulator"};
    app.set_version_flag("--version", std::string(ocsim::code_version()));
    app.require_subcommand(1);
    Options o;

    auto add_scenario = [&](CLI::App* sub) {
        sub->add_option("--scenario", o.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    };
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out, "Output directory (default: $OCSIM_OUTPUT_ROOT/<name>-<kind>-seed<seed>)");
        sub->add_option("--seed", o.seed, "Override the scenario seed");
        sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", o.quiet, "Suppress progress and summary");
        sub->add_flag("--disable-policy-phase", o.no_policy_phase)->group("");
    };

    auto* validate = app.add_subcommand("validate", "Check a scenario file");
    add_scenario(validate);

    auto* run = app.add_subcommand("run", "Run one replica");
    add_scenario(run);
    add_common(run);

    auto* batch = app.add_subcommand("batch", "Run replicas and summarize them");
    add_scenario(batch);
    add_common(batch);
    batch->add_option("--replications", o.replications, "Number of replicas")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "Difference table of two run or batch outputs");
    report->add_option("dirs", o.report_dirs, "Treatment and baseline output directories")
        ->required()
        ->expected(2)
        ->check(CLI::ExistingDirectory);
    report->add_option("--out", o.out, "Output directory");
    report->add_flag("--quiet", o.quiet);

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--host", o.host);
    serve->add_option("--port", o.port);
    serve->add_option("--store", o.store, "Results store directory");
    serve->add_option("--data-root", o.data_root, "Base directory for distribution bundle paths");
    serve->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
    serve->add_flag("--quiet", o.quiet);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (*validate) return cmd_validate(o);
        if (*run) return cmd_run(o);
        if (*batch) return cmd_batch(o);
        if (*report) return cmd_report(o);
        if (*serve) return cmd_serve(o);
    } catch (const ocsim::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}
