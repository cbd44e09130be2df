#pragma once

#include <cstdint>
#include <vector>

namespace vine {

/// Flat policy weights: the genome.
using ParameterVector = std::vector<double>;

/// One evaluation episode.
struct EvalResult {
    double fitness = 0.0;
    std::vector<double> bc;
    std::uint64_t rollout_seed = 0;

    bool operator==(const EvalResult&) const = default;
};

}  // namespace vine
