#include "vine/cli.hpp"

#include "vine/api.hpp"
#include "vine/archive.hpp"
#include "vine/error.hpp"
#include "vine/reduce.hpp"
#include "vine/session.hpp"
#include "vine/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <ostream>

namespace vine::cli {

namespace fs = std::filesystem;

namespace {

fs::path data_root() {
    const char* dir = std::getenv("VINE_DATA_DIR");
    return dir != nullptr && *dir != '\0' ? fs::path(dir) : fs::path("runs");
}

fs::path resolve_run(const std::string& run) {
    if (run.empty()) throw InvalidInput("--run is required");
    fs::path p(run);
    if (fs::is_directory(p)) return p;
    fs::path under = data_root() / run;
    if (fs::is_directory(under)) return under;
    throw ArchiveError("run directory not found: " + run);
}

struct TrainFlags {
    std::string env = "point_walker";
    std::string algo = "es";
    std::string bc = "final";
    int gens = 200;
    std::uint64_t seed = 0;
    int pop = 100;
    double sigma = 0.05;
    double alpha = 0.03;
    int truncation = 20;
    int elites = 1;
    int threads = 0;
    std::string out;
};

int do_train(const TrainFlags& f, std::ostream& out) {
    RunConfig config;
    config.algo = evo::parse_algo(f.algo);
    config.env = env::parse_env_id(f.env);
    config.bc_mode = env::parse_bc_mode(f.bc);
    config.es.population_size = f.pop;
    config.es.noise_stdev = f.sigma;
    config.es.learning_rate = f.alpha;
    config.es.generations = f.gens;
    config.es.run_seed = f.seed;
    config.ga.population_size = f.pop;
    config.ga.truncation_size = std::min(f.truncation, f.pop);
    config.ga.mutation_stdev = f.sigma;
    config.ga.elite_count = f.elites;
    config.ga.generations = f.gens;
    config.ga.run_seed = f.seed;
    (void)env::bc_dimension(config.env, config.bc_mode);

    const fs::path dir = f.out.empty()
                             ? data_root() / (f.env + "_" + f.algo + "_s" + std::to_string(f.seed))
                             : fs::path(f.out);
    archive::RunWriter writer(dir);
    evo::TrainOptions options;
    options.threads = f.threads;
    const auto summary = evo::run_evolution(config, writer, options);
    out << "wrote " << summary.generations_completed << " generations to " << dir.string()
        << " (final parent fitness " << archive::format_double(summary.final_parent_fitness) << ")\n";
    return 0;
}

int do_reduce(const std::string& run, const std::string& method_name, double perplexity, std::uint64_t seed,
              int iterations, std::ostream& out) {
    const fs::path dir = resolve_run(run);
    const auto method = reduce::parse_method(method_name);
    const auto archive = archive::read_run(dir);
    reduce::TsneOptions opts;
    opts.perplexity = perplexity;
    opts.seed = seed;
    opts.iterations = iterations;
    const auto view = reduce::reduce_run(archive, method, opts);
    reduce::write_view(dir, view);
    out << "wrote " << (dir / reduce::view_file_name(method)).string() << " (" << view.generations.size()
        << " generations)\n";
    return 0;
}

int do_export(const std::string& run, const std::string& view_name, const std::string& out_path, std::ostream& out) {
    const fs::path dir = resolve_run(run);
    const auto s = session::Session::load(dir);
    const auto method = reduce::parse_method(view_name);
    const fs::path target = out_path.empty() ? dir / ("frames_" + std::string(reduce::to_string(method)) + ".jsonl")
                                             : fs::path(out_path);
    const auto curve = s->fitness_curve();
    std::string text;
    for (int g = 0; g < s->generation_count(); ++g) {
        auto frame = api::to_json(s->generation_points(g, method), method);
        frame["fitness_so_far"] = std::vector<double>(curve.begin(), curve.begin() + g + 1);
        text += archive::canonical_dump(frame);
        text += '\n';
    }
    archive::write_file_atomic(target, text);
    out << "wrote " << s->generation_count() << " frames to " << target.string() << '\n';
    return 0;
}

int do_inspect(const std::string& run, std::ostream& out) {
    const fs::path dir = resolve_run(run);
    const auto archive = archive::read_run(dir);
    const RunManifest& m = archive.manifest();
    out << "run_id:      " << m.run_id << '\n'
        << "algo:        " << evo::to_string(m.config.algo) << '\n'
        << "env_id:      " << env::to_string(m.config.env) << " (bc " << env::to_string(m.config.bc_mode) << ", dimension "
        << m.bc_dimension << ")\n"
        << "policy:      ";
    for (std::size_t k = 0; k < m.layer_sizes.size(); ++k) out << (k ? "-" : "") << m.layer_sizes[k];
    out << " (" << env::PolicySpec{m.layer_sizes}.parameter_count() << " parameters)\n"
        << "population:  " << m.config.population_size() << '\n'
        << "generations: " << archive.generation_count() << " readable / " << m.config.generations() << " requested"
        << (archive.incomplete() ? " (incomplete)" : "") << '\n';
    if (archive.generation_count() > 0) {
        const auto first = archive.load_generation(0);
        const auto last = archive.load_generation(archive.generation_count() - 1);
        out << "parent fitness: " << archive::format_double(first.parent_fitness) << " -> "
            << archive::format_double(last.parent_fitness) << '\n';
    }
    out << "views:      ";
    for (auto v : reduce::available_views(dir)) out << ' ' << reduce::to_string(v);
    out << '\n';
    return 0;
}

api::HttpServer* active_server = nullptr;

void handle_signal(int) {
    if (active_server != nullptr) active_server->stop();
}

int do_serve(const std::vector<std::string>& runs, const std::string& bind, const std::string& ui, std::ostream& out) {
    std::vector<fs::path> dirs;
    if (runs.empty()) {
        dirs = api::discover_runs(data_root());
        if (dirs.empty()) throw NotFound("no runs found under " + data_root().string());
    } else {
        for (const auto& r : runs) dirs.push_back(resolve_run(r));
    }
    api::ServeOptions opts;
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw InvalidInput("--bind expects host:port, got '" + bind + "'");
    opts.host = bind.substr(0, colon);
    try {
        opts.port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw InvalidInput("--bind has an invalid port: '" + bind + "'");
    }
    if (!ui.empty()) opts.ui_dir = fs::path(ui);

    auto service = std::make_shared<const api::Service>(api::load_sessions(dirs));
    api::HttpServer server(service);
    const int port = server.start(opts);
    out << "serving " << service->sessions().size() << " run(s) on http://" << opts.host << ':' << port << std::endl;
    active_server = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    server.wait();
    active_server = nullptr;
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Neuroevolution run inspector: train, reduce, serve, export-frames, inspect", "vine"};
    app.require_subcommand(1, 1);

    TrainFlags tf;
    auto* train = app.add_subcommand("train", "Run ES or GA and write a run archive");
    train->add_option("--env", tf.env, "point_walker or grid_quest")->capture_default_str();
    train->add_option("--algo", tf.algo, "es or ga")->capture_default_str();
    train->add_option("--bc", tf.bc, "final or trajectory (point_walker only)")->capture_default_str();
    train->add_option("--gens", tf.gens, "Generations")->capture_default_str();
    train->add_option("--seed", tf.seed, "Run seed")->capture_default_str();
    train->add_option("--pop", tf.pop, "Population size")->capture_default_str();
    train->add_option("--sigma", tf.sigma, "ES noise stdev / GA mutation stdev")->capture_default_str();
    train->add_option("--alpha", tf.alpha, "ES learning rate")->capture_default_str();
    train->add_option("--truncation", tf.truncation, "GA truncation size")->capture_default_str();
    train->add_option("--elites", tf.elites, "GA elite count")->capture_default_str();
    train->add_option("--threads", tf.threads, "Evaluation threads (0 = all cores)")->capture_default_str();
    train->add_option("--out", tf.out, "Run directory (default $VINE_DATA_DIR/<env>_<algo>_s<seed>)");

    std::string run_dir, method = "pca", view = "identity", out_path, bind = "127.0.0.1:8080", ui;
    double perplexity = 30.0;
    std::uint64_t tsne_seed = 0;
    int tsne_iters = 1000;
    std::vector<std::string> serve_runs;

    auto* red = app.add_subcommand("reduce", "Compute a 2D view of a run's BCs");
    red->add_option("--run", run_dir, "Run directory or id under $VINE_DATA_DIR")->required();
    red->add_option("--method", method, "identity, pca or tsne")->capture_default_str();
    red->add_option("--perplexity", perplexity, "t-SNE perplexity")->capture_default_str();
    red->add_option("--seed", tsne_seed, "t-SNE seed")->capture_default_str();
    red->add_option("--iters", tsne_iters, "t-SNE iterations")->capture_default_str();

    auto* serve = app.add_subcommand("serve", "Serve the inspector API");
    serve->add_option("--run", serve_runs, "Run directories (default: every run under $VINE_DATA_DIR)");
    serve->add_option("--bind", bind, "host:port")->capture_default_str();
    serve->add_option("--ui", ui, "Directory of static inspector assets, served at /ui");

    auto* exp = app.add_subcommand("export-frames", "Write one frame record per generation for animation");
    exp->add_option("--run", run_dir, "Run directory or id")->required();
    exp->add_option("--view", view, "View to export")->capture_default_str();
    exp->add_option("--out", out_path, "Output file (default <run>/frames_<view>.jsonl)");

    auto* insp = app.add_subcommand("inspect", "Print a run summary");
    insp->add_option("--run", run_dir, "Run directory or id")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "vine: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*train) return do_train(tf, out);
        if (*red) return do_reduce(run_dir, method, perplexity, tsne_seed, tsne_iters, out);
        if (*serve) return do_serve(serve_runs, bind, ui, out);
        if (*exp) return do_export(run_dir, view, out_path, out);
        if (*insp) return do_inspect(run_dir, out);
    } catch (const std::exception& e) {
        err << "vine: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace vine::cli
