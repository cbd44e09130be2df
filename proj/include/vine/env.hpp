#pragma once

// Built-in desk-scale tasks: a point-mass walker with final-position (or full
// trajectory) behavior characterization, and a grid collection game whose BC is a
// 128-entry integer state vector.

#include "vine/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vine::env {

enum class EnvId { point_walker, grid_quest };

EnvId parse_env_id(std::string_view name);
std::string_view to_string(EnvId id);

/// What gets recorded as the BC of an evaluation.
enum class BcMode {
    final_state,  // walker: final (x, y); grid: 128-entry state vector
    trajectory,   // walker only: concatenated (x, y) for every step
};

BcMode parse_bc_mode(std::string_view name);
std::string_view to_string(BcMode mode);

inline constexpr int walker_steps = 1000;
inline constexpr double walker_dt = 0.05;
inline constexpr double walker_damping = 0.9;
inline constexpr double walker_gain = 1.0;
inline constexpr double walker_action_noise = 0.1;

inline constexpr int grid_size = 16;
inline constexpr int grid_steps = 200;
inline constexpr int grid_actions = 5;
inline constexpr int grid_items = 8;
inline constexpr int grid_item_score = 10;
inline constexpr double grid_replace_prob = 0.05;
inline constexpr int grid_bc_length = 128;

std::size_t bc_dimension(EnvId env, BcMode mode);

/// Fully connected tanh network. Layer l consumes out*in weights (row-major,
/// one row per output unit) followed by out biases; layers are laid out in order.
struct PolicySpec {
    std::vector<int> layer_sizes;

    std::size_t parameter_count() const;
    void validate() const;
};

PolicySpec default_policy(EnvId env);

std::vector<double> policy_forward(const PolicySpec& spec, std::span<const double> params,
                                   std::span<const double> observation);

/// Reusable evaluator bound to one parameter vector; avoids per-step allocation.
class PolicyNet {
public:
    PolicyNet(const PolicySpec& spec, std::span<const double> params);

    std::span<const double> forward(std::span<const double> observation);

private:
    std::vector<int> sizes_;
    std::span<const double> params_;
    std::vector<double> a_, b_;
};

struct Frame {
    int step = 0;
    std::vector<double> state;  // walker: x, y, vx, vy; grid: first 12 BC entries
    std::vector<double> action;
    double reward = 0.0;

    bool operator==(const Frame&) const = default;
};

struct RolloutTrace {
    std::vector<Frame> frames;
    std::vector<double> final_bc;
    double fitness = 0.0;

    bool operator==(const RolloutTrace&) const = default;
};

struct RolloutRequest {
    EnvId env = EnvId::point_walker;
    std::span<const double> params;
    bool stochastic = false;
    std::uint64_t rollout_seed = 0;
    bool record_trajectory = false;
    BcMode bc_mode = BcMode::final_state;
    // Defaults to default_policy(env) when empty.
    std::vector<int> layer_sizes;
};

struct RolloutResult {
    EvalResult eval;
    std::optional<RolloutTrace> trace;
};

RolloutResult rollout(const RolloutRequest& request);

/// Concatenated (x, y) per step from a recorded walker trace.
std::vector<double> trajectory_bc(const RolloutTrace& trace);

}  // namespace vine::env
