#pragma once

#include "ocsim/engine.hpp"

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace ocsim {

struct ServiceOptions {
    /// Results store: scenarios/ and runs/ live underneath.
    std::filesystem::path store = "ocsim-store";
    /// Base directory for relative distribution_bundle paths in submitted scenarios.
    std::filesystem::path data_root = ".";
    unsigned workers = 4;
    /// Runs waiting for a worker; submissions beyond it get 429.
    std::size_t queue_capacity = 16;
    std::string cors_origin = "*";
};

enum class RunStatus { Queued, Running, Finished, Failed };

std::string_view to_string(RunStatus s) noexcept;
RunStatus parse_run_status(std::string_view s);

struct HttpResponse {
    int status = 200;
    std::string body;
};

/// Scenario store, run queue and the JSON API over them.
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Dispatches one request. `path` excludes the query string.
    HttpResponse handle(std::string_view method, std::string_view path,
                        const std::multimap<std::string, std::string>& query, std::string_view body);

    /// Blocks until no run is queued or running.
    void wait_idle();

    /// Serves HTTP on a background thread; returns the bound port (pass 0 for any free port).
    int start(const std::string& host, int port);
    /// Serves HTTP on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();

private:
    struct Run;
    struct ScenarioEntry {
        ScenarioConfig config;
        nlohmann::json document;
    };

    HttpResponse post_scenario(std::string_view body);
    HttpResponse get_scenario(const std::string& id);
    HttpResponse post_run(std::string_view body);
    HttpResponse get_run(const std::string& id);
    HttpResponse get_metrics(const std::string& id, const std::multimap<std::string, std::string>& query);
    HttpResponse get_network(const std::string& id, const std::multimap<std::string, std::string>& query);
    HttpResponse get_summary(const std::string& id);
    HttpResponse compare(const std::multimap<std::string, std::string>& query);
    HttpResponse delete_run(const std::string& id);

    nlohmann::json handle_json(const Run& run) const;
    void persist(const Run& run) const;
    void load_store();
    void worker_loop();
    void execute(const std::shared_ptr<Run>& run);
    void configure_http(httplib::Server& server);

    ServiceOptions options_;
    mutable std::mutex mutex_;
    std::condition_variable work_cv_;
    std::condition_variable idle_cv_;
    std::map<std::string, ScenarioEntry> scenarios_;
    std::map<std::string, std::shared_ptr<Run>> runs_;
    std::deque<std::string> queue_;
    std::size_t running_ = 0;
    std::size_t next_scenario_ = 1;
    std::size_t next_run_ = 1;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
    std::unique_ptr<httplib::Server> http_;
    std::thread http_thread_;
};

} // namespace ocsim
