#include "vine/api.hpp"

#include "vine/error.hpp"
#include "vine/random.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>

namespace vine::api {

std::uint64_t replay_seed(std::uint64_t run_seed, int g, int i, int replay_index) {
    return derive_seed({run_seed, as_key(g), as_key(i), as_key(replay_index), 0x7265706cULL});
}

std::vector<env::RolloutTrace> rollout_replay(const session::Session& s, const RolloutReplayRequest& request) {
    if (request.count < 1) throw InvalidInput("count must be at least 1");
    const auto& rec = s.generation(request.g);
    if (request.i < -1 || request.i >= static_cast<int>(rec.offspring.size())) {
        throw NotFound("point index " + std::to_string(request.i) + " out of range for generation " + std::to_string(request.g));
    }
    const ParameterVector params = s.params(request.g, request.i);
    const RunManifest& m = s.manifest();

    env::RolloutRequest req;
    req.env = m.config.env;
    req.params = params;
    req.bc_mode = m.config.bc_mode;
    req.layer_sizes = m.layer_sizes;
    req.record_trajectory = true;

    std::vector<env::RolloutTrace> traces;
    if (!request.stochastic) {
        req.stochastic = false;
        req.rollout_seed = request.i < 0 ? rec.parent_rollout_seed : rec.offspring[static_cast<std::size_t>(request.i)].rollout_seed;
        traces.push_back(*env::rollout(req).trace);
        return traces;
    }
    req.stochastic = true;
    traces.reserve(static_cast<std::size_t>(request.count));
    for (int r = 0; r < request.count; ++r) {
        req.rollout_seed = replay_seed(m.config.run_seed(), request.g, request.i, r);
        traces.push_back(*env::rollout(req).trace);
    }
    return traces;
}

json to_json(const session::PointSlice& slice, reduce::Method method) {
    json points = json::array();
    for (const auto& p : slice.points) {
        points.push_back({{"index", p.index}, {"x", p.x}, {"y", p.y}, {"fitness", p.fitness}, {"bin", p.bin},
                          {"is_parent", p.is_parent}});
    }
    return {{"g", slice.g}, {"view", std::string(reduce::to_string(method))}, {"points", std::move(points)}};
}

json to_json(const env::RolloutTrace& trace, std::uint64_t rollout_seed) {
    json frames = json::array();
    for (const auto& f : trace.frames) {
        frames.push_back({{"step", f.step}, {"state", f.state}, {"action", f.action}, {"reward", f.reward}});
    }
    return {{"frames", std::move(frames)}, {"final_bc", trace.final_bc}, {"fitness", trace.fitness},
            {"rollout_seed", rollout_seed}};
}

json point_detail(const session::Session& s, int g, int i) {
    const auto& rec = s.generation(g);
    if (i < -1 || i >= static_cast<int>(rec.offspring.size())) {
        throw NotFound("point index " + std::to_string(i) + " out of range for generation " + std::to_string(g));
    }
    json coords = json::object();
    for (auto m : s.views()) {
        const auto& c = s.view(m).generations[static_cast<std::size_t>(g)];
        const auto row = static_cast<std::size_t>(i + 1);
        coords[std::string(reduce::to_string(m))] = {c(row, 0), c(row, 1)};
    }
    json j = {{"g", g}, {"index", i}, {"is_parent", i < 0}, {"coords", std::move(coords)}};
    if (i < 0) {
        j["fitness"] = rec.parent_fitness;
        j["bc"] = rec.parent_bc;
        j["rollout_seed"] = rec.parent_rollout_seed;
    } else {
        const auto& e = rec.offspring[static_cast<std::size_t>(i)];
        j["fitness"] = e.fitness;
        j["bc"] = e.bc;
        j["rollout_seed"] = e.rollout_seed;
        j["noise_seed"] = e.spec.noise_seed;
        j["sign"] = e.spec.sign;
        if (s.manifest().config.algo == evo::Algo::ga) {
            j["parent_index"] = e.parent_index;
            j["elite"] = e.elite;
        }
    }
    return j;
}

Service::Service(std::vector<std::shared_ptr<const session::Session>> sessions) {
    for (auto& s : sessions) {
        const std::string id = s->manifest().run_id;
        if (!sessions_.emplace(id, std::move(s)).second) throw InvalidInput("duplicate run id '" + id + "'");
    }
}

namespace {

Response reply(int status, const json& body) { return {status, archive::canonical_dump(body), "application/json"}; }

Response error(int status, const std::string& message) { return reply(status, json{{"error", message}}); }

std::vector<std::string_view> split_path(std::string_view path) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (pos < path.size()) {
        if (path[pos] == '/') {
            ++pos;
            continue;
        }
        const std::size_t end = path.find('/', pos);
        parts.push_back(path.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        if (end == std::string_view::npos) break;
        pos = end;
    }
    return parts;
}

int parse_int(std::string_view s, const char* what) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw InvalidInput(std::string("invalid ") + what + " '" + std::string(s) + "'");
    }
    return v;
}

double parse_real(const std::string& s, const char* what) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw InvalidInput(std::string("invalid ") + what + " '" + s + "'");
    }
    return v;
}

reduce::Method view_param(const session::Session& s, const std::map<std::string, std::string>& query) {
    auto it = query.find("view");
    if (it != query.end()) return reduce::parse_method(it->second);
    const auto views = s.views();
    if (views.empty()) throw NotFound("run has no reduction views; run `vine reduce` first");
    return views.front();
}

}  // namespace

Response Service::handle(std::string_view method, std::string_view path, const std::map<std::string, std::string>& query,
                         std::string_view body) const {
    try {
        const auto parts = split_path(path);
        if (parts.empty() || parts[0] != "runs") return error(404, "no such endpoint");

        if (parts.size() == 1) {
            if (method != "GET") return error(405, "method not allowed");
            json list = json::array();
            for (const auto& [id, s] : sessions_) list.push_back(archive::to_json(s->manifest()));
            return reply(200, list);
        }

        auto it = sessions_.find(std::string(parts[1]));
        if (it == sessions_.end()) return error(404, "unknown run '" + std::string(parts[1]) + "'");
        const session::Session& s = *it->second;
        if (parts.size() < 3) return reply(200, archive::to_json(s.manifest()));
        const std::string_view what = parts[2];

        if (method == "POST") {
            if (what != "rollout" || parts.size() != 3) return error(404, "no such endpoint");
            json req_json;
            try {
                req_json = json::parse(body);
            } catch (const json::exception&) {
                throw InvalidInput("rollout request body is not valid JSON");
            }
            RolloutReplayRequest req;
            try {
                req.g = req_json.at("g").get<int>();
                req.i = req_json.at("i").get<int>();
                req.stochastic = req_json.value("stochastic", false);
                req.count = req_json.value("count", default_replay_count);
            } catch (const json::exception& ex) {
                throw InvalidInput(std::string("bad rollout request: ") + ex.what());
            }
            const auto traces = rollout_replay(s, req);
            const auto& rec = s.generation(req.g);
            json out = json::array();
            for (std::size_t r = 0; r < traces.size(); ++r) {
                const std::uint64_t seed =
                    req.stochastic ? replay_seed(s.manifest().config.run_seed(), req.g, req.i, static_cast<int>(r))
                    : req.i < 0    ? rec.parent_rollout_seed
                                   : rec.offspring[static_cast<std::size_t>(req.i)].rollout_seed;
                out.push_back(to_json(traces[r], seed));
            }
            return reply(200, out);
        }
        if (method != "GET") return error(405, "method not allowed");

        if (what == "manifest" && parts.size() == 3) {
            json m = archive::to_json(s.manifest());
            return reply(200, m);
        }
        if (what == "views" && parts.size() == 3) {
            json v = json::array();
            for (auto m : s.views()) v.push_back(std::string(reduce::to_string(m)));
            return reply(200, v);
        }
        if (what == "fitness" && parts.size() == 3) {
            return reply(200, json{{"parent_fitness", s.fitness_curve()}});
        }
        if (what == "generations" && parts.size() == 4) {
            const int g = parse_int(parts[3], "generation");
            const auto m = view_param(s, query);
            return reply(200, to_json(s.generation_points(g, m), m));
        }
        if (what == "point" && parts.size() == 5) {
            return reply(200, point_detail(s, parse_int(parts[3], "generation"), parse_int(parts[4], "point index")));
        }
        if (what == "nearest" && parts.size() == 4) {
            const int g = parse_int(parts[3], "generation");
            const auto m = view_param(s, query);
            const auto qx = query.find("x");
            const auto qy = query.find("y");
            if (qx == query.end() || qy == query.end()) throw InvalidInput("nearest needs x and y query parameters");
            const int idx = s.nearest_point(m, g, parse_real(qx->second, "x"), parse_real(qy->second, "y"));
            return reply(200, json{{"g", g}, {"view", std::string(reduce::to_string(m))}, {"index", idx}});
        }
        return error(404, "no such endpoint");
    } catch (const NotFound& ex) {
        return error(404, ex.what());
    } catch (const InvalidInput& ex) {
        return error(400, ex.what());
    } catch (const std::exception& ex) {
        return error(500, ex.what());
    }
}

std::vector<std::shared_ptr<const session::Session>> load_sessions(const std::vector<std::filesystem::path>& run_dirs) {
    if (run_dirs.empty()) throw NotFound("no runs found");
    std::vector<std::shared_ptr<const session::Session>> out;
    for (const auto& dir : run_dirs) out.push_back(session::Session::load(dir));
    return out;
}

std::vector<std::filesystem::path> discover_runs(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> out;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(root, ec)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.json")) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

HttpServer::HttpServer(std::shared_ptr<const Service> service)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
    auto route = [svc = service_](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) query.emplace(k, v);
        const Response r = svc->handle(req.method, req.path, query, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server_->Get("/runs.*", route);
    server_->Post("/runs.*", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const ServeOptions& options) {
    if (options.ui_dir && !server_->set_mount_point("/ui", options.ui_dir->string())) {
        throw InvalidInput("cannot serve UI assets from " + options.ui_dir->string());
    }
    int port = options.port;
    if (port == 0) {
        port = server_->bind_to_any_port(options.host);
        if (port < 0) throw std::runtime_error("cannot bind " + options.host);
    } else if (!server_->bind_to_port(options.host, port)) {
        throw std::runtime_error("cannot bind " + options.host + ":" + std::to_string(port));
    }
    worker_ = std::thread([this] { server_->listen_after_bind(); });
    return port;
}

void HttpServer::wait() {
    if (worker_.joinable()) worker_.join();
}

void HttpServer::stop() {
    if (server_) server_->stop();
    wait();
}

}  // namespace vine::api
