#include "ocsim/service.hpp"

#include "ocsim/csv.hpp"
#include "ocsim/report.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <atomic>

namespace ocsim {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kStatusNames{"queued", "running", "finished", "failed"};

// Frame fields compared by /compare, keyed by their metric name.
const std::vector<std::pair<std::string, std::string>>& frame_fields() {
    static const std::vector<std::pair<std::string, std::string>> fields{
        {"crimes", "crimesThisTick"},
        {"annualized_crime_rate_per_100k", "annualizedCrimeRatePer100k"},
        {"oc_member_count", "ocMemberCount"},
        {"recruits", "recruitsThisTick"},
        {"incarcerated", "incarceratedCount"},
        {"mean_r", "meanR"},
        {"alive", "alive"},
    };
    return fields;
}

HttpResponse json_response(int status, const json& body) { return {status, body.dump()}; }

HttpResponse error(int status, std::string message) { return json_response(status, {{"error", std::move(message)}}); }

HttpResponse unprocessable(const std::vector<Diagnostic>& diags) {
    json list = json::array();
    for (const auto& d : diags) list.push_back({{"path", d.path}, {"message", d.message}});
    const auto summary = diags.empty() ? std::string("invalid request")
                                       : (diags.front().path.empty() ? diags.front().message
                                                                     : diags.front().path + ": " + diags.front().message);
    return json_response(422, {{"error", summary}, {"diagnostics", std::move(list)}});
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        const auto j = path.find('/', i);
        const auto end = j == std::string_view::npos ? path.size() : j;
        if (end > i) parts.emplace_back(path.substr(i, end - i));
        i = end;
    }
    return parts;
}

std::optional<std::string> query_value(const std::multimap<std::string, std::string>& q, const std::string& key) {
    auto it = q.find(key);
    if (it == q.end()) return std::nullopt;
    return it->second;
}

std::optional<long long> parse_int(const std::string& s) {
    try {
        std::size_t used = 0;
        const auto v = std::stoll(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

MetricSeries series_from_docs(const std::vector<json>& frames) {
    MetricSeries s;
    for (const auto& f : frames) {
        s.ticks.push_back(f.at("tick").get<Tick>());
        for (const auto& [metric, key] : frame_fields()) s.values[metric].push_back(f.at(key).get<double>());
    }
    return s;
}

} // namespace

std::string_view to_string(RunStatus s) noexcept { return kStatusNames[static_cast<std::size_t>(s)]; }

RunStatus parse_run_status(std::string_view s) {
    for (std::size_t i = 0; i < kStatusNames.size(); ++i)
        if (kStatusNames[i] == s) return static_cast<RunStatus>(i);
    throw ConfigError("status", fmt::format("unknown run status '{}'", s));
}

struct Service::Run {
    std::string id;
    std::string scenario_id;
    std::string hash;
    std::uint64_t seed = 0;
    std::size_t replications = 1;
    int horizon = 0;
    RunStatus status = RunStatus::Queued;
    std::string error;
    std::size_t replica = 0;
    Tick replica_ticks = 0;
    /// Frames of replica 0, as served.
    std::vector<json> frames;
    std::vector<SummaryRow> summary;
    /// Edge change log of replica 0; absent for runs loaded from the store.
    std::optional<std::vector<EdgeChange>> history;
    std::atomic<bool> cancel{false};
};

Service::Service(ServiceOptions options) : options_{std::move(options)} {
    std::filesystem::create_directories(options_.store / "scenarios");
    std::filesystem::create_directories(options_.store / "runs");
    load_store();
    for (unsigned i = 0; i < std::max(1u, options_.workers); ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
    stop();
    {
        std::lock_guard lock{mutex_};
        stopping_ = true;
        for (auto& [id, run] : runs_) run->cancel = true;
    }
    work_cv_.notify_all();
    for (auto& w : workers_) w.join();
}

json Service::handle_json(const Run& run) const {
    json h{{"runId", run.id},
           {"scenarioId", run.scenario_id},
           {"scenarioHash", run.hash},
           {"seed", run.seed},
           {"replications", run.replications},
           {"status", to_string(run.status)},
           {"progress",
            {{"tick", static_cast<Tick>(run.frames.size())},
             {"horizon", run.horizon},
             {"replica", run.replica},
             {"replicaTick", run.replica_ticks}}}};
    if (!run.error.empty()) h["error"] = run.error;
    return h;
}

void Service::persist(const Run& run) const {
    const auto dir = options_.store / "runs" / run.id;
    std::filesystem::create_directories(dir);
    json doc{{"id", run.id},         {"scenarioId", run.scenario_id}, {"hash", run.hash},
             {"seed", run.seed},     {"replications", run.replications}, {"horizon", run.horizon},
             {"status", to_string(run.status)}, {"error", run.error}};
    if (run.status == RunStatus::Finished) {
        write_text_file(dir / "metrics.json", json(run.frames).dump());
        write_text_file(dir / "summary.csv", export_summary(run.summary));
    }
    // run.json last: its status is what a restart trusts.
    write_text_file(dir / "run.json", doc.dump(2));
}

void Service::load_store() {
    for (const auto& entry : std::filesystem::directory_iterator(options_.store / "scenarios")) {
        if (entry.path().extension() != ".json") continue;
        const auto id = entry.path().stem().string();
        try {
            auto doc = json::parse(read_text_file(entry.path()));
            auto config = scenario_from_json(doc, options_.data_root);
            scenarios_[id] = {std::move(config), std::move(doc)};
            if (auto n = parse_int(id.substr(1)); n && *n >= 0)
                next_scenario_ = std::max(next_scenario_, static_cast<std::size_t>(*n) + 1);
        } catch (const std::exception&) {
            // unreadable entries are left on disk and skipped
        }
    }
    std::vector<std::shared_ptr<Run>> requeue;
    for (const auto& entry : std::filesystem::directory_iterator(options_.store / "runs")) {
        const auto file = entry.path() / "run.json";
        if (!std::filesystem::exists(file)) continue;
        try {
            const auto doc = json::parse(read_text_file(file));
            auto run = std::make_shared<Run>();
            run->id = doc.at("id").get<std::string>();
            run->scenario_id = doc.at("scenarioId").get<std::string>();
            run->hash = doc.at("hash").get<std::string>();
            run->seed = doc.at("seed").get<std::uint64_t>();
            run->replications = doc.at("replications").get<std::size_t>();
            run->horizon = doc.at("horizon").get<int>();
            run->status = parse_run_status(doc.at("status").get<std::string>());
            run->error = doc.value("error", "");
            if (run->status == RunStatus::Finished) {
                for (auto& f : json::parse(read_text_file(entry.path() / "metrics.json"))) run->frames.push_back(f);
            } else if (run->status == RunStatus::Running) {
                run->status = RunStatus::Failed;
                run->error = "interrupted by a service restart";
                persist(*run);
            } else if (run->status == RunStatus::Queued) {
                requeue.push_back(run);
            }
            if (auto n = parse_int(run->id.substr(1)); n && *n >= 0)
                next_run_ = std::max(next_run_, static_cast<std::size_t>(*n) + 1);
            runs_[run->id] = run;
        } catch (const std::exception&) {
        }
    }
    std::sort(requeue.begin(), requeue.end(), [](const auto& a, const auto& b) {
        return parse_int(a->id.substr(1)).value_or(0) < parse_int(b->id.substr(1)).value_or(0);
    });
    for (const auto& r : requeue) queue_.push_back(r->id);
}

HttpResponse Service::handle(std::string_view method, std::string_view path,
                             const std::multimap<std::string, std::string>& query, std::string_view body) {
    const auto parts = split_path(path);
    try {
        if (method == "GET" && parts.size() == 1 && parts[0] == "health") return json_response(200, {{"status", "ok"}});
        if (parts.size() >= 1 && parts[0] == "scenarios") {
            if (method == "POST" && parts.size() == 1) return post_scenario(body);
            if (method == "GET" && parts.size() == 2) return get_scenario(parts[1]);
        }
        if (parts.size() >= 1 && parts[0] == "runs") {
            if (method == "POST" && parts.size() == 1) return post_run(body);
            if (method == "GET" && parts.size() == 2) return get_run(parts[1]);
            if (method == "DELETE" && parts.size() == 2) return delete_run(parts[1]);
            if (method == "GET" && parts.size() == 3 && parts[2] == "metrics") return get_metrics(parts[1], query);
            if (method == "GET" && parts.size() == 3 && parts[2] == "network") return get_network(parts[1], query);
            if (method == "GET" && parts.size() == 3 && parts[2] == "summary") return get_summary(parts[1]);
        }
        if (method == "GET" && parts.size() == 1 && parts[0] == "compare") return compare(query);
    } catch (const ConfigError& e) {
        return unprocessable({{e.path(), e.message()}});
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
    return error(404, fmt::format("no route for {} {}", method, path));
}

HttpResponse Service::post_scenario(std::string_view body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error& e) {
        return unprocessable({{"", fmt::format("malformed JSON: {}", e.what())}});
    }
    ScenarioConfig config;
    try {
        config = scenario_from_json(doc, options_.data_root);
    } catch (const ConfigError& e) {
        return unprocessable({{e.path(), e.message()}});
    } catch (const json::exception& e) {
        return unprocessable({{"", e.what()}});
    }
    std::lock_guard lock{mutex_};
    const auto id = fmt::format("s{}", next_scenario_++);
    write_text_file(options_.store / "scenarios" / (id + ".json"), doc.dump(2));
    const auto hash = scenario_hash(config);
    scenarios_[id] = {std::move(config), std::move(doc)};
    return json_response(201, {{"scenarioId", id}, {"scenarioHash", hash}});
}

HttpResponse Service::get_scenario(const std::string& id) {
    std::lock_guard lock{mutex_};
    auto it = scenarios_.find(id);
    if (it == scenarios_.end()) return error(404, fmt::format("unknown scenario '{}'", id));
    return json_response(200, it->second.document);
}

HttpResponse Service::post_run(std::string_view body) {
    json doc;
    try {
        doc = body.empty() ? json::object() : json::parse(body);
    } catch (const json::parse_error& e) {
        return unprocessable({{"", fmt::format("malformed JSON: {}", e.what())}});
    }
    if (!doc.is_object()) return unprocessable({{"", "expected an object"}});
    if (!doc.contains("scenarioId") || !doc["scenarioId"].is_string())
        return unprocessable({{"scenarioId", "required string"}});
    std::size_t replications = 1;
    if (doc.contains("replications")) {
        const auto& r = doc["replications"];
        if (!r.is_number_integer() || r.get<long long>() < 1)
            return unprocessable({{"replications", "must be an integer >= 1"}});
        replications = r.get<std::size_t>();
    }
    std::optional<std::uint64_t> seed;
    if (doc.contains("seed")) {
        const auto& s = doc["seed"];
        if (!s.is_number_integer() || s.get<long long>() < 0) return unprocessable({{"seed", "must be a non-negative integer"}});
        seed = s.get<std::uint64_t>();
    }

    std::unique_lock lock{mutex_};
    const auto sid = doc["scenarioId"].get<std::string>();
    auto it = scenarios_.find(sid);
    if (it == scenarios_.end()) return error(404, fmt::format("unknown scenario '{}'", sid));
    if (queue_.size() >= options_.queue_capacity) return error(429, "run queue is full, retry later");

    auto run = std::make_shared<Run>();
    run->id = fmt::format("r{}", next_run_++);
    run->scenario_id = sid;
    ScenarioConfig config = it->second.config;
    if (seed) config.seed = *seed;
    run->seed = config.seed;
    run->hash = scenario_hash(config);
    run->replications = replications;
    run->horizon = config.horizon_ticks;
    runs_[run->id] = run;
    queue_.push_back(run->id);
    persist(*run);
    const auto handle = handle_json(*run);
    lock.unlock();
    work_cv_.notify_one();
    return json_response(202, handle);
}

HttpResponse Service::get_run(const std::string& id) {
    std::lock_guard lock{mutex_};
    auto it = runs_.find(id);
    if (it == runs_.end()) return error(404, fmt::format("unknown run '{}'", id));
    return json_response(200, handle_json(*it->second));
}

HttpResponse Service::get_metrics(const std::string& id, const std::multimap<std::string, std::string>& query) {
    long long from = 0;
    if (auto v = query_value(query, "fromTick")) {
        auto n = parse_int(*v);
        if (!n || *n < 0) return unprocessable({{"fromTick", "must be a non-negative integer"}});
        from = *n;
    }
    std::lock_guard lock{mutex_};
    auto it = runs_.find(id);
    if (it == runs_.end()) return error(404, fmt::format("unknown run '{}'", id));
    json out = json::array();
    const auto& frames = it->second->frames;
    for (auto i = static_cast<std::size_t>(std::min<long long>(from, static_cast<long long>(frames.size())));
         i < frames.size(); ++i)
        out.push_back(frames[i]);
    return json_response(200, out);
}

HttpResponse Service::get_network(const std::string& id, const std::multimap<std::string, std::string>& query) {
    const auto tick_s = query_value(query, "tick");
    const auto layer_s = query_value(query, "layer");
    if (!tick_s) return unprocessable({{"tick", "required"}});
    if (!layer_s) return unprocessable({{"layer", "required"}});
    const auto tick = parse_int(*tick_s);
    if (!tick) return unprocessable({{"tick", "must be an integer"}});
    LayerId layer;
    try {
        layer = parse_layer(*layer_s);
    } catch (const std::exception& e) {
        return unprocessable({{"layer", e.what()}});
    }
    std::lock_guard lock{mutex_};
    auto it = runs_.find(id);
    if (it == runs_.end()) return error(404, fmt::format("unknown run '{}'", id));
    const auto& run = *it->second;
    if (*tick < kSynthesisTick || *tick >= static_cast<long long>(run.frames.size()))
        return error(404, fmt::format("tick {} has not been simulated", *tick));
    if (!run.history) return error(404, "network snapshots of this run were not retained");
    json edges = json::array();
    for (const auto& e : edges_at(*run.history, static_cast<Tick>(*tick), layer))
        edges.push_back({{"source", e.source}, {"target", e.target}, {"createdTick", e.created}});
    return json_response(200, {{"runId", run.id}, {"tick", *tick}, {"layer", to_string(layer)}, {"edges", edges}});
}

HttpResponse Service::get_summary(const std::string& id) {
    std::lock_guard lock{mutex_};
    auto it = runs_.find(id);
    if (it == runs_.end()) return error(404, fmt::format("unknown run '{}'", id));
    const auto& run = *it->second;
    if (run.status != RunStatus::Finished) return error(409, "run has not finished");
    if (run.summary.empty()) {
        // loaded from the store: summary.csv holds it
        const auto t = read_csv(options_.store / "runs" / run.id / "summary.csv");
        json rows = json::array();
        for (const auto& r : t.rows)
            rows.push_back({{"tick", std::stoi(r[0])}, {"metric", r[1]}, {"mean", std::stod(r[2])},
                            {"ciLow", std::stod(r[3])}, {"ciHigh", std::stod(r[4])}, {"n", std::stoul(r[5])}});
        return json_response(200, rows);
    }
    json rows = json::array();
    for (const auto& r : run.summary)
        rows.push_back({{"tick", r.tick}, {"metric", r.metric}, {"mean", r.mean}, {"ciLow", r.ci_low},
                        {"ciHigh", r.ci_high}, {"n", r.n}});
    return json_response(200, rows);
}

HttpResponse Service::compare(const std::multimap<std::string, std::string>& query) {
    const auto a = query_value(query, "a");
    const auto b = query_value(query, "b");
    if (!a) return unprocessable({{"a", "required"}});
    if (!b) return unprocessable({{"b", "required"}});
    std::lock_guard lock{mutex_};
    auto ia = runs_.find(*a);
    if (ia == runs_.end()) return error(404, fmt::format("unknown run '{}'", *a));
    auto ib = runs_.find(*b);
    if (ib == runs_.end()) return error(404, fmt::format("unknown run '{}'", *b));
    const auto diff = compare_series(series_from_docs(ia->second->frames), series_from_docs(ib->second->frames));
    return json_response(200, {{"a", *a}, {"b", *b}, {"differences", diff}});
}

HttpResponse Service::delete_run(const std::string& id) {
    std::lock_guard lock{mutex_};
    auto it = runs_.find(id);
    if (it == runs_.end()) return error(404, fmt::format("unknown run '{}'", id));
    auto& run = *it->second;
    switch (run.status) {
    case RunStatus::Finished: return error(409, "run already finished");
    case RunStatus::Failed: return error(409, "run already failed");
    case RunStatus::Queued:
        queue_.erase(std::remove(queue_.begin(), queue_.end(), id), queue_.end());
        run.status = RunStatus::Failed;
        run.error = "cancelled";
        persist(run);
        idle_cv_.notify_all();
        break;
    case RunStatus::Running: run.cancel = true; break;
    }
    return json_response(200, handle_json(run));
}

void Service::wait_idle() {
    std::unique_lock lock{mutex_};
    idle_cv_.wait(lock, [&] { return queue_.empty() && running_ == 0; });
}

void Service::worker_loop() {
    for (;;) {
        std::shared_ptr<Run> run;
        {
            std::unique_lock lock{mutex_};
            work_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            run = runs_.at(queue_.front());
            queue_.pop_front();
            run->status = RunStatus::Running;
            ++running_;
            persist(*run);
        }
        execute(run);
        {
            std::lock_guard lock{mutex_};
            --running_;
        }
        idle_cv_.notify_all();
    }
}

void Service::execute(const std::shared_ptr<Run>& run) {
    ScenarioConfig base;
    {
        std::lock_guard lock{mutex_};
        base = scenarios_.at(run->scenario_id).config;
    }
    base.seed = run->seed;
    std::vector<RunResult> results;
    try {
        for (std::size_t r = 0; r < run->replications; ++r) {
            ScenarioConfig cfg = base;
            cfg.seed = base.seed + r;
            EngineOptions opts;
            opts.record_history = r == 0;
            Simulation sim{std::move(cfg), opts};
            {
                std::lock_guard lock{mutex_};
                run->replica = r;
                run->replica_ticks = 0;
            }
            sim.run([&](const MetricsFrame& f) {
                std::lock_guard lock{mutex_};
                if (r == 0) run->frames.push_back(to_json(f));
                run->replica_ticks = f.tick + 1;
                return !run->cancel.load();
            });
            if (run->cancel) {
                std::lock_guard lock{mutex_};
                run->status = RunStatus::Failed;
                run->error = "cancelled";
                persist(*run);
                return;
            }
            if (r == 0) {
                std::lock_guard lock{mutex_};
                run->history = sim.society().graph.history();
            }
            RunResult res;
            res.frames = sim.frames();
            results.push_back(std::move(res));
        }
        std::lock_guard lock{mutex_};
        run->summary = summarize(results);
        run->status = RunStatus::Finished;
        persist(*run);
    } catch (const std::exception& e) {
        std::lock_guard lock{mutex_};
        run->status = RunStatus::Failed;
        run->error = e.what();
        persist(*run);
    }
}

void Service::configure_http(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = handle(req.method, req.path, req.params, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server.Get(R"(.*)", dispatch);
    server.Post(R"(.*)", dispatch);
    server.Delete(R"(.*)", dispatch);
}

int Service::start(const std::string& host, int port) {
    http_ = std::make_unique<httplib::Server>();
    configure_http(*http_);
    const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error(fmt::format("cannot bind {}:{}", host, port));
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    return bound;
}

bool Service::listen(const std::string& host, int port) {
    http_ = std::make_unique<httplib::Server>();
    configure_http(*http_);
    return http_->listen(host, port);
}

void Service::stop() {
    if (http_) http_->stop();
    if (http_thread_.joinable()) http_thread_.join();
}

} // namespace ocsim
