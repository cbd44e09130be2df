#pragma once

#include "vine/records.hpp"

#include <cstdint>
#include <functional>

namespace vine::evo {

/// Receives the run as it is produced. Implemented by the archive writer.
class GenerationSink {
public:
    virtual ~GenerationSink() = default;
    virtual void begin(const RunConfig& config, const std::vector<int>& layer_sizes, int bc_dimension) = 0;
    virtual void write(const GenerationRecord& record) = 0;
    virtual void finish() = 0;
};

struct RunSummary {
    int generations_completed = 0;
    double final_parent_fitness = 0.0;
};

struct TrainOptions {
    // Evaluation threads; 0 picks std::thread::hardware_concurrency().
    int threads = 0;
    // Called after every generation.
    std::function<void(const GenerationRecord&)> on_generation;
};

std::uint64_t evaluation_seed(std::uint64_t run_seed, int generation, int index);

RunSummary run_evolution(const RunConfig& config, GenerationSink& sink, const TrainOptions& options = {});

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Indices are independent.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace vine::evo
