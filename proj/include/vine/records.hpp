#pragma once

#include "vine/env.hpp"
#include "vine/evo.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vine {

struct RunConfig {
    evo::Algo algo = evo::Algo::es;
    env::EnvId env = env::EnvId::point_walker;
    env::BcMode bc_mode = env::BcMode::final_state;
    evo::EsConfig es;
    evo::GaConfig ga;

    int population_size() const { return algo == evo::Algo::es ? es.population_size : ga.population_size; }
    int generations() const { return algo == evo::Algo::es ? es.generations : ga.generations; }
    std::uint64_t run_seed() const { return algo == evo::Algo::es ? es.run_seed : ga.run_seed; }

    bool operator==(const RunConfig&) const = default;
};

struct OffspringEntry {
    evo::OffspringSpec spec;
    double fitness = 0.0;
    std::vector<double> bc;
    std::uint64_t rollout_seed = 0;
    // GA provenance
    int parent_index = -1;
    bool elite = false;
    std::optional<std::vector<double>> params;  // GA checkpoint generations only

    bool operator==(const OffspringEntry&) const = default;
};

struct GenerationRecord {
    int g = 0;
    std::vector<double> parent_params;
    double parent_fitness = 0.0;
    std::vector<double> parent_bc;
    std::uint64_t parent_rollout_seed = 0;
    std::vector<OffspringEntry> offspring;

    bool operator==(const GenerationRecord&) const = default;
};

struct RunManifest {
    std::string run_id;
    RunConfig config;
    int bc_dimension = 0;
    std::vector<int> layer_sizes;
    int generations_completed = 0;
    bool complete = false;

    bool operator==(const RunManifest&) const = default;
};

/// GA member parameters are stored in full every this many generations.
inline constexpr int ga_checkpoint_interval = 25;

}  // namespace vine
