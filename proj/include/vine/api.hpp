#pragma once

// Read-only HTTP API over loaded sessions.
//
//   GET  /runs                                  manifest list
//   GET  /runs/{id}/manifest
//   GET  /runs/{id}/views                       available reduction views
//   GET  /runs/{id}/fitness                     parent fitness per generation
//   GET  /runs/{id}/generations/{g}?view={v}    PointSlice
//   GET  /runs/{id}/point/{g}/{i}               full record for one point (i = -1: parent)
//   GET  /runs/{id}/nearest/{g}?view={v}&x=&y=  index of the closest point
//   POST /runs/{id}/rollout                     RolloutReplayRequest -> list of RolloutTrace

#include "vine/env.hpp"
#include "vine/session.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace vine::api {

using archive::json;

inline constexpr int default_replay_count = 9;

struct RolloutReplayRequest {
    int g = 0;
    int i = -1;
    bool stochastic = false;
    int count = default_replay_count;
};

std::uint64_t replay_seed(std::uint64_t run_seed, int g, int i, int replay_index);

/// Deterministic: one trace. Stochastic: `count` traces with derived seeds.
std::vector<env::RolloutTrace> rollout_replay(const session::Session& session, const RolloutReplayRequest& request);

json to_json(const session::PointSlice& slice, reduce::Method method);
json to_json(const env::RolloutTrace& trace, std::uint64_t rollout_seed);
json point_detail(const session::Session& session, int g, int i);

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Endpoint router. Pure over the sessions it was built with.
class Service {
public:
    explicit Service(std::vector<std::shared_ptr<const session::Session>> sessions);

    Response handle(std::string_view method, std::string_view path, const std::map<std::string, std::string>& query,
                    std::string_view body) const;

    const std::map<std::string, std::shared_ptr<const session::Session>>& sessions() const { return sessions_; }

private:
    std::map<std::string, std::shared_ptr<const session::Session>> sessions_;
};

/// Loads every run directory; fails on the first unreadable one.
std::vector<std::shared_ptr<const session::Session>> load_sessions(const std::vector<std::filesystem::path>& run_dirs);

/// Subdirectories of `root` holding a manifest.json, sorted by name.
std::vector<std::filesystem::path> discover_runs(const std::filesystem::path& root);

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 binds an ephemeral port
    std::optional<std::filesystem::path> ui_dir;  // mounted at /ui
};

class HttpServer {
public:
    explicit HttpServer(std::shared_ptr<const Service> service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and starts serving on a background thread; returns the bound port.
    int start(const ServeOptions& options);
    /// Blocks the calling thread until stop().
    void wait();
    void stop();

private:
    std::shared_ptr<const Service> service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread worker_;
};

}  // namespace vine::api
