#include "vine/cli.hpp"
#include "vine/archive.hpp"
#include "vine/reduce.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <sstream>

using namespace vine;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome vine_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string dir_bytes(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += f.filename().string() + '\n' + archive::read_file(f);
    return all;
}

}  // namespace

TEST_CASE("train writes an archive") {
    testing::TempDir tmp("cli");
    const auto r = vine_cli({"train", "--env", "point_walker", "--algo", "es", "--gens", "3", "--pop", "6", "--seed", "4",
                             "--out", (tmp / "run").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("wrote 3 generations") != std::string::npos);
    const auto run = archive::read_run(tmp / "run");
    CHECK(run.generation_count() == 3);
    CHECK(run.manifest().config.es.run_seed == 4);
    CHECK(run.manifest().config.es.population_size == 6);
    CHECK_FALSE(run.incomplete());
}

TEST_CASE("train is byte-deterministic") {
    testing::TempDir tmp("cli");
    for (const char* parent : {"a", "b"}) {
        const auto r = vine_cli({"train", "--env", "grid_quest", "--algo", "ga", "--gens", "2", "--pop", "8", "--truncation",
                                 "3", "--seed", "9", "--out", (tmp / parent / "run").string()});
        REQUIRE(r.code == 0);
    }
    CHECK(dir_bytes(tmp / "a" / "run") == dir_bytes(tmp / "b" / "run"));
}

TEST_CASE("default output under VINE_DATA_DIR and run-id resolution") {
    testing::TempDir tmp("cli");
    setenv("VINE_DATA_DIR", tmp.path().c_str(), 1);
    REQUIRE(vine_cli({"train", "--gens", "2", "--pop", "4", "--seed", "3"}).code == 0);
    CHECK(fs::exists(tmp / "point_walker_es_s3" / "manifest.json"));
    const auto r = vine_cli({"inspect", "--run", "point_walker_es_s3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("run_id:      point_walker_es_s3") != std::string::npos);
    CHECK(r.out.find("2 readable / 2 requested") != std::string::npos);
    unsetenv("VINE_DATA_DIR");
}

TEST_CASE("reduce and export-frames") {
    testing::TempDir tmp("cli");
    REQUIRE(vine_cli({"train", "--gens", "3", "--pop", "10", "--seed", "1", "--out", (tmp / "run").string()}).code == 0);

    auto r = vine_cli({"reduce", "--run", (tmp / "run").string(), "--method", "pca"});
    CHECK(r.code == 0);
    CHECK(fs::exists(tmp / "run" / "view_pca.jsonl"));
    r = vine_cli({"reduce", "--run", (tmp / "run").string(), "--method", "tsne", "--perplexity", "5", "--iters", "300"});
    CHECK(r.code == 0);
    CHECK(reduce::available_views(tmp / "run") == std::vector<reduce::Method>{reduce::Method::pca, reduce::Method::tsne});

    r = vine_cli({"export-frames", "--run", (tmp / "run").string(), "--view", "tsne", "--out", (tmp / "f.jsonl").string()});
    CHECK(r.code == 0);
    const auto text = archive::read_file(tmp / "f.jsonl");
    std::istringstream lines(text);
    std::string line;
    int g = 0;
    while (std::getline(lines, line)) {
        const auto j = archive::json::parse(line);
        CHECK(j["g"] == g);
        CHECK(j["view"] == "tsne");
        CHECK(j["points"].size() == 11);
        CHECK(j["fitness_so_far"].size() == static_cast<std::size_t>(g + 1));
        ++g;
    }
    CHECK(g == 3);

    r = vine_cli({"inspect", "--run", (tmp / "run").string()});
    CHECK(r.out.find("views:       pca tsne") != std::string::npos);
}

TEST_CASE("diagnostics") {
    testing::TempDir tmp("cli");
    auto r = vine_cli({"train", "--bogus", "1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("--bogus") != std::string::npos);

    r = vine_cli({});
    CHECK(r.code == 2);

    r = vine_cli({"train", "--env", "moon", "--out", (tmp / "x").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("moon") != std::string::npos);

    r = vine_cli({"train", "--env", "grid_quest", "--bc", "trajectory", "--out", (tmp / "x").string()});
    CHECK(r.code == 1);

    r = vine_cli({"train", "--pop", "5", "--gens", "1", "--out", (tmp / "x").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("even") != std::string::npos);

    r = vine_cli({"inspect", "--run", (tmp / "missing").string()});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("vine: ", 0) == 0);

    REQUIRE(vine_cli({"train", "--env", "grid_quest", "--gens", "1", "--pop", "4", "--out", (tmp / "g").string()}).code == 0);
    r = vine_cli({"reduce", "--run", (tmp / "g").string(), "--method", "identity"});
    CHECK(r.code == 1);
    CHECK(r.err.find("bc_dimension") != std::string::npos);

    r = vine_cli({"serve", "--run", (tmp / "g").string(), "--bind", "nocolon"});
    CHECK(r.code == 1);

    r = vine_cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("export-frames") != std::string::npos);
}
