#include "vine/trainer.hpp"

#include "vine/env.hpp"
#include "vine/error.hpp"
#include "vine/random.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace vine::evo {

std::uint64_t evaluation_seed(std::uint64_t run_seed, int generation, int index) {
    return derive_seed({run_seed, as_key(generation), as_key(index), 0x726f6c6cULL});
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

namespace {

EvalResult evaluate(const RunConfig& config, const std::vector<int>& layers, std::span<const double> params,
                    std::uint64_t seed) {
    env::RolloutRequest req;
    req.env = config.env;
    req.params = params;
    req.stochastic = false;
    req.rollout_seed = seed;
    req.bc_mode = config.bc_mode;
    req.layer_sizes = layers;
    return env::rollout(req).eval;
}

RunSummary run_es(const RunConfig& config, GenerationSink& sink, const TrainOptions& options) {
    const EsConfig& es = config.es;
    const auto layers = env::default_policy(config.env).layer_sizes;
    ParameterVector parent = initial_params({layers}, es.run_seed);
    const auto n = static_cast<std::size_t>(es.population_size);

    RunSummary summary;
    for (int g = 0; g < es.generations; ++g) {
        GenerationRecord rec;
        rec.g = g;
        rec.parent_params = parent;
        const auto parent_eval = evaluate(config, layers, parent, evaluation_seed(es.run_seed, g, -1));
        rec.parent_fitness = parent_eval.fitness;
        rec.parent_bc = parent_eval.bc;
        rec.parent_rollout_seed = parent_eval.rollout_seed;

        const auto specs = es_offspring_specs(es, g);
        rec.offspring.resize(n);
        parallel_for(n, options.threads, [&](std::size_t i) {
            const auto params = offspring_params(parent, es.noise_stdev, specs[i]);
            auto ev = evaluate(config, layers, params, evaluation_seed(es.run_seed, g, static_cast<int>(i)));
            OffspringEntry& e = rec.offspring[i];
            e.spec = specs[i];
            e.fitness = ev.fitness;
            e.bc = std::move(ev.bc);
            e.rollout_seed = ev.rollout_seed;
        });

        sink.write(rec);
        if (options.on_generation) options.on_generation(rec);
        summary.generations_completed = g + 1;
        summary.final_parent_fitness = rec.parent_fitness;

        std::vector<double> fitnesses(n);
        for (std::size_t i = 0; i < n; ++i) fitnesses[i] = rec.offspring[i].fitness;
        parent = es_update(parent, specs, fitnesses, es);
    }
    return summary;
}

RunSummary run_ga(const RunConfig& config, GenerationSink& sink, const TrainOptions& options) {
    const GaConfig& ga = config.ga;
    const auto layers = env::default_policy(config.env).layer_sizes;
    const auto n = static_cast<std::size_t>(ga.population_size);

    ParameterVector parent = initial_params({layers}, ga.run_seed);
    // Generation 0: every member is a mutation of the seed genome.
    std::vector<GaChild> members;
    members.reserve(n);
    const std::uint64_t first_seed = ga_step_seed(ga.run_seed, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t noise_seed = splitmix64(derive_seed({first_seed, as_key(static_cast<long long>(i))}));
        members.push_back({offspring_params(parent, ga.mutation_stdev, {noise_seed, 1}), -1, noise_seed, false});
    }

    RunSummary summary;
    for (int g = 0; g < ga.generations; ++g) {
        GenerationRecord rec;
        rec.g = g;
        rec.parent_params = parent;
        const auto parent_eval = evaluate(config, layers, parent, evaluation_seed(ga.run_seed, g, -1));
        rec.parent_fitness = parent_eval.fitness;
        rec.parent_bc = parent_eval.bc;
        rec.parent_rollout_seed = parent_eval.rollout_seed;

        const bool checkpoint = g % ga_checkpoint_interval == 0;
        rec.offspring.resize(n);
        parallel_for(n, options.threads, [&](std::size_t i) {
            auto ev = evaluate(config, layers, members[i].params, evaluation_seed(ga.run_seed, g, static_cast<int>(i)));
            OffspringEntry& e = rec.offspring[i];
            e.spec = {members[i].noise_seed, 1};
            e.fitness = ev.fitness;
            e.bc = std::move(ev.bc);
            e.rollout_seed = ev.rollout_seed;
            e.parent_index = members[i].parent_index;
            e.elite = members[i].elite;
            if (checkpoint) e.params = members[i].params;
        });

        sink.write(rec);
        if (options.on_generation) options.on_generation(rec);
        summary.generations_completed = g + 1;
        summary.final_parent_fitness = rec.parent_fitness;

        std::vector<ParameterVector> population;
        std::vector<double> fitnesses;
        population.reserve(n);
        fitnesses.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            population.push_back(std::move(members[i].params));
            fitnesses.push_back(rec.offspring[i].fitness);
        }
        // Next generation's parent entry is this generation's best member.
        const auto best = static_cast<std::size_t>(
            std::max_element(fitnesses.begin(), fitnesses.end()) - fitnesses.begin());
        parent = population[best];
        if (g + 1 < ga.generations) members = ga_step(population, fitnesses, ga, ga_step_seed(ga.run_seed, g + 1));
    }
    return summary;
}

}  // namespace

RunSummary run_evolution(const RunConfig& config, GenerationSink& sink, const TrainOptions& options) {
    if (config.algo == Algo::es) {
        config.es.validate();
    } else {
        config.ga.validate();
    }
    const auto layers = env::default_policy(config.env).layer_sizes;
    sink.begin(config, layers, static_cast<int>(env::bc_dimension(config.env, config.bc_mode)));
    const RunSummary summary = config.algo == Algo::es ? run_es(config, sink, options) : run_ga(config, sink, options);
    sink.finish();
    return summary;
}

}  // namespace vine::evo
