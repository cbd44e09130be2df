#pragma once

// ES perturbation/aggregation and a truncation-selection GA.

#include "vine/env.hpp"
#include "vine/types.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace vine::evo {

enum class Algo { es, ga };

Algo parse_algo(std::string_view name);
std::string_view to_string(Algo algo);

struct EsConfig {
    int population_size = 100;
    double noise_stdev = 0.05;
    double learning_rate = 0.03;
    bool mirrored = true;
    int generations = 200;
    std::uint64_t run_seed = 0;

    void validate() const;
    bool operator==(const EsConfig&) const = default;
};

struct GaConfig {
    int population_size = 100;
    int truncation_size = 20;
    double mutation_stdev = 0.05;
    int elite_count = 1;
    int generations = 200;
    std::uint64_t run_seed = 0;

    void validate() const;
    bool operator==(const GaConfig&) const = default;
};

/// Identifies one perturbation: epsilon = sign * normal_vector(noise_seed).
struct OffspringSpec {
    std::uint64_t noise_seed = 0;
    int sign = 1;

    bool operator==(const OffspringSpec&) const = default;
};

/// Centered ranks in [-0.5, 0.5]; ties share their average rank.
std::vector<double> centered_ranks(std::span<const double> fitnesses);

std::vector<double> perturbation(std::uint64_t noise_seed, std::size_t d, int sign);

/// parent + sigma * perturbation(spec). The single code path for both training-time
/// evaluation and archive reconstruction.
ParameterVector offspring_params(std::span<const double> parent, double sigma, const OffspringSpec& spec);

/// Mirrored pairs (2k, 2k+1) share a seed keyed by (run_seed, generation, k).
std::vector<OffspringSpec> es_offspring_specs(const EsConfig& config, int generation);

ParameterVector es_update(std::span<const double> parent, std::span<const OffspringSpec> specs,
                          std::span<const double> fitnesses, const EsConfig& config);

/// Same update with explicit noise vectors (each already carrying its sign).
ParameterVector es_update(std::span<const double> parent, std::span<const std::vector<double>> noise,
                          std::span<const double> fitnesses, const EsConfig& config);

struct GaChild {
    ParameterVector params;
    int parent_index = -1;      // index into the previous population
    std::uint64_t noise_seed = 0;  // mutation seed; unused for elites
    bool elite = false;

    bool operator==(const GaChild&) const = default;
};

std::uint64_t ga_step_seed(std::uint64_t run_seed, int generation);

/// Elites first (best to worst), then mutated copies of uniformly chosen top-T members.
std::vector<GaChild> ga_step(std::span<const ParameterVector> population, std::span<const double> fitnesses,
                             const GaConfig& config, std::uint64_t step_seed);

/// Seeded starting genome.
ParameterVector initial_params(const env::PolicySpec& spec, std::uint64_t run_seed);

inline constexpr double initial_param_stdev = 0.1;

}  // namespace vine::evo
