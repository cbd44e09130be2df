#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vine {

std::uint64_t splitmix64(std::uint64_t x);

/// Order-sensitive hash of a key tuple, e.g. (run_seed, generation, index).
/// Negative indices are folded in through their two's-complement bit pattern.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

inline std::uint64_t as_key(long long v) { return static_cast<std::uint64_t>(v); }

/// Seeded stream of uniform and standard-normal deviates.
///
/// The engine is std::mt19937_64 (fully specified by the standard); the uniform and
/// normal transforms are written out here because the standard distributions are
/// implementation-defined, and stored seeds must reproduce the same numbers everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    /// Box-Muller, pairs cached.
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vine
