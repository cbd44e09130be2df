#include "vine/evo.hpp"

#include "vine/error.hpp"
#include "vine/kernels.hpp"
#include "vine/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vine::evo {

Algo parse_algo(std::string_view name) {
    if (name == "es") return Algo::es;
    if (name == "ga") return Algo::ga;
    throw InvalidInput("unknown algo '" + std::string(name) + "' (expected es or ga)");
}

std::string_view to_string(Algo algo) { return algo == Algo::es ? "es" : "ga"; }

void EsConfig::validate() const {
    if (population_size < 2) throw InvalidInput("ES population_size must be at least 2");
    if (mirrored && population_size % 2 != 0) throw InvalidInput("mirrored sampling needs an even population_size");
    if (!(noise_stdev > 0.0) || !std::isfinite(noise_stdev)) throw InvalidInput("noise_stdev must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidInput("learning_rate must be positive");
    if (generations < 1) throw InvalidInput("generations must be positive");
}

void GaConfig::validate() const {
    if (population_size < 1) throw InvalidInput("GA population_size must be positive");
    if (truncation_size < 1 || truncation_size > population_size) {
        throw InvalidInput("truncation_size must lie in [1, population_size]");
    }
    if (elite_count < 0 || elite_count > truncation_size) throw InvalidInput("elite_count must lie in [0, truncation_size]");
    if (!(mutation_stdev > 0.0) || !std::isfinite(mutation_stdev)) throw InvalidInput("mutation_stdev must be positive");
    if (generations < 1) throw InvalidInput("generations must be positive");
}

namespace {

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidInput(std::string("non-finite ") + what);
    }
}

// Indices sorted by ascending fitness; equal fitnesses keep index order.
std::vector<std::size_t> ascending_order(std::span<const double> f) {
    std::vector<std::size_t> order(f.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    return order;
}

}  // namespace

std::vector<double> centered_ranks(std::span<const double> fitnesses) {
    const std::size_t n = fitnesses.size();
    if (n == 0) throw InvalidInput("centered_ranks needs at least one fitness");
    require_finite(fitnesses, "fitness");
    std::vector<double> w(n, 0.0);
    if (n == 1) return w;

    const auto order = ascending_order(fitnesses);
    const double denom = 2.0 * static_cast<double>(n - 1);
    for (std::size_t lo = 0; lo < n;) {
        std::size_t hi = lo;
        while (hi + 1 < n && fitnesses[order[hi + 1]] == fitnesses[order[lo]]) ++hi;
        // average rank (lo + hi) / 2 mapped by r / (n - 1) - 0.5
        const double weight = static_cast<double>(lo + hi) / denom - 0.5;
        for (std::size_t k = lo; k <= hi; ++k) w[order[k]] = weight;
        lo = hi + 1;
    }
    return w;
}

std::vector<double> perturbation(std::uint64_t noise_seed, std::size_t d, int sign) {
    Rng rng(noise_seed);
    std::vector<double> eps(d);
    const double s = sign < 0 ? -1.0 : 1.0;
    for (double& e : eps) e = s * rng.normal();
    return eps;
}

ParameterVector offspring_params(std::span<const double> parent, double sigma, const OffspringSpec& spec) {
    ParameterVector out(parent.begin(), parent.end());
    const auto eps = perturbation(spec.noise_seed, parent.size(), spec.sign);
    kernels::axpy(sigma, eps, out);
    return out;
}

std::vector<OffspringSpec> es_offspring_specs(const EsConfig& config, int generation) {
    std::vector<OffspringSpec> specs;
    specs.reserve(static_cast<std::size_t>(config.population_size));
    for (int i = 0; i < config.population_size; ++i) {
        if (config.mirrored) {
            const int pair = i / 2;
            const std::uint64_t seed = derive_seed({config.run_seed, as_key(generation), as_key(pair)});
            specs.push_back({seed, i % 2 == 0 ? 1 : -1});
        } else {
            specs.push_back({derive_seed({config.run_seed, as_key(generation), as_key(i)}), 1});
        }
    }
    return specs;
}

ParameterVector es_update(std::span<const double> parent, std::span<const std::vector<double>> noise,
                          std::span<const double> fitnesses, const EsConfig& config) {
    const auto n = static_cast<std::size_t>(config.population_size);
    if (noise.size() != n || fitnesses.size() != n) {
        throw InvalidInput("es_update: expected " + std::to_string(n) + " offspring, got " +
                           std::to_string(noise.size()) + " noise vectors and " + std::to_string(fitnesses.size()) +
                           " fitnesses");
    }
    const auto w = centered_ranks(fitnesses);
    ParameterVector next(parent.begin(), parent.end());
    if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) return next;

    std::vector<double> step(parent.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (noise[i].size() != parent.size()) throw InvalidInput("es_update: noise length differs from parent");
        if (w[i] != 0.0) kernels::axpy(w[i], noise[i], step);
    }
    const double scale = config.learning_rate / (static_cast<double>(n) * config.noise_stdev);
    kernels::axpy(scale, step, next);
    return next;
}

ParameterVector es_update(std::span<const double> parent, std::span<const OffspringSpec> specs,
                          std::span<const double> fitnesses, const EsConfig& config) {
    if (specs.size() != fitnesses.size()) throw InvalidInput("es_update: specs and fitnesses differ in length");
    std::vector<std::vector<double>> noise;
    noise.reserve(specs.size());
    for (const auto& s : specs) noise.push_back(perturbation(s.noise_seed, parent.size(), s.sign));
    return es_update(parent, noise, fitnesses, config);
}

std::uint64_t ga_step_seed(std::uint64_t run_seed, int generation) {
    return derive_seed({run_seed, as_key(generation), 0x6761ULL});
}

std::vector<GaChild> ga_step(std::span<const ParameterVector> population, std::span<const double> fitnesses,
                             const GaConfig& config, std::uint64_t step_seed) {
    if (population.empty()) throw InvalidInput("ga_step: empty population");
    config.validate();
    const auto n = static_cast<std::size_t>(config.population_size);
    if (population.size() != n || fitnesses.size() != n) {
        throw InvalidInput("ga_step: population size " + std::to_string(population.size()) + " differs from config " +
                           std::to_string(n));
    }
    require_finite(fitnesses, "fitness");

    // Descending fitness, ties to the lower index.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitnesses[a] > fitnesses[b]; });

    std::vector<GaChild> children;
    children.reserve(n);
    const auto elites = static_cast<std::size_t>(config.elite_count);
    for (std::size_t k = 0; k < elites; ++k) {
        children.push_back({population[order[k]], static_cast<int>(order[k]), 0, true});
    }
    for (std::size_t c = elites; c < n; ++c) {
        const std::uint64_t key = derive_seed({step_seed, as_key(static_cast<long long>(c))});
        Rng pick(key);
        const std::size_t parent = order[pick.below(static_cast<std::uint64_t>(config.truncation_size))];
        const std::uint64_t noise_seed = splitmix64(key);
        children.push_back({offspring_params(population[parent], config.mutation_stdev, {noise_seed, 1}),
                            static_cast<int>(parent), noise_seed, false});
    }
    return children;
}

ParameterVector initial_params(const env::PolicySpec& spec, std::uint64_t run_seed) {
    Rng rng(derive_seed({run_seed, 0x696e6974ULL}));
    ParameterVector p(spec.parameter_count());
    for (double& v : p) v = initial_param_stdev * rng.normal();
    return p;
}

}  // namespace vine::evo
