#include "vine/api.hpp"
#include "vine/error.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <httplib.h>

#include <cmath>
#include <fstream>

using namespace vine;
using namespace vine::api;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    testing::TempDir tmp{"api"};
    std::shared_ptr<const Service> service;

    Fixture() {
        testing::train_into(tmp / "alpha", testing::small_es(env::EnvId::point_walker, 3, 6, 1));
        testing::train_into(tmp / "beta", testing::small_ga(env::EnvId::grid_quest, 2, 4, 2));
        const auto grid = archive::read_run(tmp / "beta");
        reduce::write_view(tmp / "beta", reduce::reduce_run(grid, reduce::Method::pca));
        service = std::make_shared<const Service>(load_sessions(discover_runs(tmp.path())));
    }

    Response get(const std::string& path, const std::map<std::string, std::string>& q = {}) const {
        return service->handle("GET", path, q, "");
    }
    json get_json(const std::string& path, const std::map<std::string, std::string>& q = {}) const {
        const auto r = get(path, q);
        REQUIRE(r.status == 200);
        return json::parse(r.body);
    }
    const session::Session& session(const std::string& id) const { return *service->sessions().at(id); }
};

}  // namespace

TEST_CASE("discover_runs and /runs") {
    Fixture f;
    const auto dirs = discover_runs(f.tmp.path());
    REQUIRE(dirs.size() == 2);
    CHECK(dirs[0].filename() == "alpha");
    const auto runs = f.get_json("/runs");
    REQUIRE(runs.size() == 2);
    CHECK(runs[0]["run_id"] == "alpha");
    CHECK(runs[1]["run_id"] == "beta");
    CHECK(f.get_json("/runs/beta/manifest") == archive::to_json(f.session("beta").manifest()));
    CHECK(f.get_json("/runs/beta/manifest") == runs[1]);
}

TEST_CASE("views and fitness") {
    Fixture f;
    CHECK(f.get_json("/runs/alpha/views") == json::array({"identity"}));
    CHECK(f.get_json("/runs/beta/views") == json::array({"pca"}));
    const auto fit = f.get_json("/runs/alpha/fitness")["parent_fitness"];
    REQUIRE(fit.size() == 3);
    for (int g = 0; g < 3; ++g) CHECK(fit[g].get<double>() == f.session("alpha").generation(g).parent_fitness);
}

TEST_CASE("generations endpoint passes the session slice through") {
    Fixture f;
    for (int g = 0; g < 3; ++g) {
        const auto body = f.get("/runs/alpha/generations/" + std::to_string(g), {{"view", "identity"}}).body;
        const auto want = to_json(f.session("alpha").generation_points(g, reduce::Method::identity), reduce::Method::identity);
        CHECK(body == archive::canonical_dump(want));
    }
    // Default view is the first available.
    CHECK(f.get("/runs/beta/generations/1").body ==
          archive::canonical_dump(to_json(f.session("beta").generation_points(1, reduce::Method::pca), reduce::Method::pca)));
    const auto j = f.get_json("/runs/alpha/generations/0");
    REQUIRE(j["points"].size() == 7);
    CHECK(j["points"][0]["is_parent"] == true);
    CHECK(j["points"][0]["index"] == -1);
}

TEST_CASE("error statuses") {
    Fixture f;
    CHECK(f.get("/runs/nope/manifest").status == 404);
    CHECK(f.get("/runs/alpha/generations/3").status == 404);
    CHECK(f.get("/runs/alpha/generations/-1").status == 404);
    CHECK(f.get("/runs/alpha/point/0/6").status == 404);
    CHECK(f.get("/runs/alpha/generations/x").status == 400);
    CHECK(f.get("/runs/alpha/generations/0", {{"view", "umap"}}).status == 400);
    CHECK(f.get("/runs/alpha/generations/0", {{"view", "tsne"}}).status == 404);
    CHECK(f.get("/runs/alpha/bogus").status == 404);
    CHECK(f.get("/elsewhere").status == 404);
    CHECK(f.service->handle("POST", "/runs/alpha/rollout", {}, "{bad").status == 400);
    CHECK(f.service->handle("POST", "/runs/alpha/rollout", {}, R"({"g":0})").status == 400);
    CHECK(f.service->handle("POST", "/runs/alpha/rollout", {}, R"({"g":9,"i":0})").status == 404);
    const auto err = json::parse(f.get("/runs/nope/manifest").body);
    CHECK(err.contains("error"));
}

TEST_CASE("point detail and nearest") {
    Fixture f;
    const auto& rec = f.session("alpha").generation(1);
    const auto p = f.get_json("/runs/alpha/point/1/2");
    CHECK(p["fitness"].get<double>() == rec.offspring[2].fitness);
    CHECK(p["bc"].get<std::vector<double>>() == rec.offspring[2].bc);
    CHECK(p["noise_seed"].get<std::uint64_t>() == rec.offspring[2].spec.noise_seed);
    CHECK(p["sign"] == rec.offspring[2].spec.sign);
    const auto parent = f.get_json("/runs/alpha/point/1/-1");
    CHECK(parent["is_parent"] == true);
    CHECK(parent["bc"].get<std::vector<double>>() == rec.parent_bc);

    const double x = rec.offspring[4].bc[0], y = rec.offspring[4].bc[1];
    char buf[2][64];
    std::snprintf(buf[0], 64, "%.17g", x);
    std::snprintf(buf[1], 64, "%.17g", y);
    const auto n = f.get_json("/runs/alpha/nearest/1", {{"view", "identity"}, {"x", buf[0]}, {"y", buf[1]}});
    CHECK(n["index"] == f.session("alpha").nearest_point(reduce::Method::identity, 1, x, y));
    CHECK(f.get("/runs/alpha/nearest/1", {{"view", "identity"}}).status == 400);
}

TEST_CASE("rollout replay") {
    Fixture f;
    SUBCASE("deterministic replay lands on the stored BC") {
        for (int i : {-1, 0, 5}) {
            const auto r = f.service->handle("POST", "/runs/alpha/rollout", {},
                                             R"({"g":2,"i":)" + std::to_string(i) + "}");
            REQUIRE(r.status == 200);
            const auto traces = json::parse(r.body);
            REQUIRE(traces.size() == 1);
            const auto& rec = f.session("alpha").generation(2);
            const auto& bc = i < 0 ? rec.parent_bc : rec.offspring[static_cast<std::size_t>(i)].bc;
            const auto frames = traces[0]["frames"];
            REQUIRE(frames.size() == env::walker_steps);
            const auto last = frames.back()["state"].get<std::vector<double>>();
            CHECK(last[0] == bc[0]);
            CHECK(last[1] == bc[1]);
            CHECK(traces[0]["final_bc"].get<std::vector<double>>() == bc);
        }
    }
    SUBCASE("stochastic replay returns repeatable, distinct traces") {
        const std::string body = R"({"g":1,"i":3,"stochastic":true})";
        const auto a = f.service->handle("POST", "/runs/alpha/rollout", {}, body);
        const auto b = f.service->handle("POST", "/runs/alpha/rollout", {}, body);
        REQUIRE(a.status == 200);
        CHECK(a.body == b.body);
        const auto traces = json::parse(a.body);
        REQUIRE(traces.size() == default_replay_count);
        CHECK(traces[0]["final_bc"] != traces[1]["final_bc"]);
        CHECK(traces[0]["rollout_seed"] != traces[1]["rollout_seed"]);
    }
    SUBCASE("GA lineage replay on the grid") {
        const auto r = f.service->handle("POST", "/runs/beta/rollout", {}, R"({"g":1,"i":2})");
        REQUIRE(r.status == 200);
        const auto traces = json::parse(r.body);
        CHECK(traces[0]["fitness"].get<double>() == f.session("beta").generation(1).offspring[2].fitness);
        CHECK(traces[0]["final_bc"].get<std::vector<double>>() == f.session("beta").generation(1).offspring[2].bc);
    }
}

TEST_CASE("responses are byte-deterministic across reloads") {
    Fixture f;
    const auto again = std::make_shared<const Service>(load_sessions(discover_runs(f.tmp.path())));
    for (const std::string path : {"/runs", "/runs/alpha/generations/2", "/runs/beta/point/1/0", "/runs/alpha/fitness"})
        CHECK(f.get(path).body == again->handle("GET", path, {}, "").body);
}

TEST_CASE("HTTP round trip") {
    Fixture f;
    fs::create_directories(f.tmp / "ui");
    std::ofstream(f.tmp / "ui" / "index.html") << "<html>ok</html>";

    HttpServer server(f.service);
    ServeOptions opts;
    opts.port = 0;
    opts.ui_dir = f.tmp / "ui";
    const int port = server.start(opts);
    REQUIRE(port > 0);

    httplib::Client cli("127.0.0.1", port);
    auto runs = cli.Get("/runs");
    REQUIRE(runs);
    CHECK(runs->status == 200);
    CHECK(runs->body == f.get("/runs").body);
    CHECK(runs->get_header_value("Content-Type").find("application/json") != std::string::npos);

    auto slice = cli.Get("/runs/alpha/generations/1?view=identity");
    REQUIRE(slice);
    CHECK(slice->body == f.get("/runs/alpha/generations/1", {{"view", "identity"}}).body);

    auto missing = cli.Get("/runs/zzz/manifest");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    auto post = cli.Post("/runs/alpha/rollout", R"({"g":0,"i":1})", "application/json");
    REQUIRE(post);
    CHECK(post->status == 200);

    auto ui = cli.Get("/ui/index.html");
    REQUIRE(ui);
    CHECK(ui->status == 200);
    CHECK(ui->body == "<html>ok</html>");
    server.stop();
}
