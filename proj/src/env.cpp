#include "vine/env.hpp"

#include "vine/error.hpp"
#include "vine/kernels.hpp"
#include "vine/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace vine::env {

EnvId parse_env_id(std::string_view name) {
    if (name == "point_walker") return EnvId::point_walker;
    if (name == "grid_quest") return EnvId::grid_quest;
    throw InvalidInput("unknown env_id '" + std::string(name) + "'");
}

std::string_view to_string(EnvId id) {
    return id == EnvId::point_walker ? "point_walker" : "grid_quest";
}

BcMode parse_bc_mode(std::string_view name) {
    if (name == "final") return BcMode::final_state;
    if (name == "trajectory") return BcMode::trajectory;
    throw InvalidInput("unknown bc mode '" + std::string(name) + "'");
}

std::string_view to_string(BcMode mode) {
    return mode == BcMode::final_state ? "final" : "trajectory";
}

std::size_t bc_dimension(EnvId env, BcMode mode) {
    if (env == EnvId::grid_quest) {
        if (mode != BcMode::final_state) throw InvalidInput("grid_quest only supports the final-state BC");
        return grid_bc_length;
    }
    return mode == BcMode::final_state ? 2 : 2 * static_cast<std::size_t>(walker_steps);
}

std::size_t PolicySpec::parameter_count() const {
    std::size_t d = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        d += static_cast<std::size_t>(layer_sizes[l] + 1) * static_cast<std::size_t>(layer_sizes[l + 1]);
    }
    return d;
}

void PolicySpec::validate() const {
    if (layer_sizes.size() < 2) throw InvalidInput("policy needs at least an input and an output layer");
    for (int s : layer_sizes) {
        if (s <= 0) throw InvalidInput("policy layer sizes must be positive");
    }
}

PolicySpec default_policy(EnvId env) {
    if (env == EnvId::point_walker) return {{4, 16, 16, 2}};
    return {{2 + grid_items, 32, grid_actions}};
}

PolicyNet::PolicyNet(const PolicySpec& spec, std::span<const double> params)
    : sizes_(spec.layer_sizes), params_(params) {
    spec.validate();
    if (params.size() != spec.parameter_count()) {
        throw InvalidInput("parameter length " + std::to_string(params.size()) + " does not match policy size " +
                           std::to_string(spec.parameter_count()));
    }
    const int widest = *std::max_element(sizes_.begin(), sizes_.end());
    a_.resize(static_cast<std::size_t>(widest));
    b_.resize(static_cast<std::size_t>(widest));
}

std::span<const double> PolicyNet::forward(std::span<const double> observation) {
    if (observation.size() != static_cast<std::size_t>(sizes_.front())) {
        throw InvalidInput("observation length " + std::to_string(observation.size()) + " does not match input layer " +
                           std::to_string(sizes_.front()));
    }
    std::copy(observation.begin(), observation.end(), a_.begin());
    const double* p = params_.data();
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const auto in = static_cast<std::size_t>(sizes_[l]);
        const auto out = static_cast<std::size_t>(sizes_[l + 1]);
        const double* weights = p;
        const double* bias = p + in * out;
        const std::span<const double> input(a_.data(), in);
        for (std::size_t o = 0; o < out; ++o) {
            b_[o] = std::tanh(kernels::dot(std::span(weights + o * in, in), input) + bias[o]);
        }
        p = bias + out;
        std::swap(a_, b_);
    }
    return {a_.data(), static_cast<std::size_t>(sizes_.back())};
}

std::vector<double> policy_forward(const PolicySpec& spec, std::span<const double> params,
                                   std::span<const double> observation) {
    PolicyNet net(spec, params);
    const auto out = net.forward(observation);
    return {out.begin(), out.end()};
}

namespace {

RolloutResult walker_rollout(const RolloutRequest& req, const PolicySpec& spec) {
    if (spec.layer_sizes.front() != 4 || spec.layer_sizes.back() != 2) {
        throw InvalidInput("point_walker policy must map 4 observations to 2 actions");
    }
    PolicyNet net(spec, req.params);
    Rng noise(req.rollout_seed);

    double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
    std::vector<double> path;
    if (req.bc_mode == BcMode::trajectory) path.reserve(2 * walker_steps);

    RolloutTrace trace;
    if (req.record_trajectory) trace.frames.reserve(walker_steps);

    double dist = 0.0;
    for (int t = 0; t < walker_steps; ++t) {
        const std::array<double, 4> obs{x, y, vx, vy};
        const auto out = net.forward(obs);
        double ax = out[0];
        double ay = out[1];
        if (req.stochastic) {
            ax += walker_action_noise * noise.normal();
            ay += walker_action_noise * noise.normal();
        }
        ax = std::clamp(ax, -1.0, 1.0);
        ay = std::clamp(ay, -1.0, 1.0);

        x += walker_dt * vx;
        y += walker_dt * vy;
        vx = walker_damping * vx + walker_gain * ax;
        vy = walker_damping * vy + walker_gain * ay;

        const double next_dist = std::hypot(x, y);
        if (req.bc_mode == BcMode::trajectory) {
            path.push_back(x);
            path.push_back(y);
        }
        if (req.record_trajectory) {
            trace.frames.push_back(Frame{t, {x, y, vx, vy}, {ax, ay}, next_dist - dist});
        }
        dist = next_dist;
    }

    RolloutResult result;
    result.eval.fitness = dist;
    result.eval.rollout_seed = req.rollout_seed;
    if (req.bc_mode == BcMode::trajectory) {
        result.eval.bc = std::move(path);
    } else {
        result.eval.bc = {x, y};
    }
    if (req.record_trajectory) {
        trace.final_bc = result.eval.bc;
        trace.fitness = result.eval.fitness;
        result.trace = std::move(trace);
    }
    return result;
}

struct Cell {
    int x, y;
};

constexpr std::array<Cell, grid_items> grid_item_cells{{
    {2, 2}, {13, 2}, {2, 13}, {13, 13}, {8, 3}, {3, 8}, {12, 8}, {8, 12},
}};
constexpr Cell grid_start{7, 7};

RolloutResult grid_rollout(const RolloutRequest& req, const PolicySpec& spec) {
    if (req.bc_mode != BcMode::final_state) throw InvalidInput("grid_quest only supports the final-state BC");
    if (spec.layer_sizes.front() != 2 + grid_items || spec.layer_sizes.back() != grid_actions) {
        throw InvalidInput("grid_quest policy must map 10 observations to 5 actions");
    }
    PolicyNet net(spec, req.params);
    Rng noise(req.rollout_seed);

    int x = grid_start.x, y = grid_start.y;
    std::array<bool, grid_items> collected{};
    int score = 0;

    // x, y, 8 flags, score, steps elapsed
    auto state = [&](int steps) {
        std::vector<double> s;
        s.reserve(4 + grid_items);
        s.push_back(x);
        s.push_back(y);
        for (bool c : collected) s.push_back(c ? 1.0 : 0.0);
        s.push_back(score);
        s.push_back(steps);
        return s;
    };

    RolloutTrace trace;
    if (req.record_trajectory) trace.frames.reserve(grid_steps);

    std::array<double, 2 + grid_items> obs{};
    for (int t = 0; t < grid_steps; ++t) {
        obs[0] = x / double(grid_size - 1);
        obs[1] = y / double(grid_size - 1);
        for (int k = 0; k < grid_items; ++k) obs[2 + k] = collected[k] ? 1.0 : 0.0;
        const auto out = net.forward(obs);
        int action = static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
        if (req.stochastic && noise.uniform() < grid_replace_prob) {
            action = static_cast<int>(noise.below(grid_actions));
        }
        switch (action) {
            case 1: y = std::min(y + 1, grid_size - 1); break;
            case 2: y = std::max(y - 1, 0); break;
            case 3: x = std::max(x - 1, 0); break;
            case 4: x = std::min(x + 1, grid_size - 1); break;
            default: break;
        }
        double reward = 0.0;
        for (int k = 0; k < grid_items; ++k) {
            if (!collected[k] && grid_item_cells[k].x == x && grid_item_cells[k].y == y) {
                collected[k] = true;
                score += grid_item_score;
                reward += grid_item_score;
            }
        }
        if (req.record_trajectory) {
            trace.frames.push_back(Frame{t, state(t + 1), {double(action)}, reward});
        }
    }

    RolloutResult result;
    result.eval.bc = state(grid_steps);
    result.eval.bc.resize(grid_bc_length, 0.0);
    result.eval.fitness = score;
    result.eval.rollout_seed = req.rollout_seed;
    if (req.record_trajectory) {
        trace.final_bc = result.eval.bc;
        trace.fitness = result.eval.fitness;
        result.trace = std::move(trace);
    }
    return result;
}

}  // namespace

RolloutResult rollout(const RolloutRequest& request) {
    const PolicySpec spec = request.layer_sizes.empty() ? default_policy(request.env) : PolicySpec{request.layer_sizes};
    spec.validate();
    if (request.params.size() != spec.parameter_count()) {
        throw InvalidInput("parameter length " + std::to_string(request.params.size()) + " does not match " +
                           std::string(to_string(request.env)) + " policy size " +
                           std::to_string(spec.parameter_count()));
    }
    return request.env == EnvId::point_walker ? walker_rollout(request, spec) : grid_rollout(request, spec);
}

std::vector<double> trajectory_bc(const RolloutTrace& trace) {
    if (trace.frames.empty()) throw InvalidInput("trace has no recorded trajectory");
    std::vector<double> out;
    out.reserve(2 * trace.frames.size());
    for (const Frame& f : trace.frames) {
        if (f.state.size() < 2) throw InvalidInput("trace frame lacks an (x, y) state");
        out.push_back(f.state[0]);
        out.push_back(f.state[1]);
    }
    return out;
}

}  // namespace vine::env
