#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drol/error.hpp"
#include "drol/latent_prior.hpp"
#include "drol/nn.hpp"
#include "drol/rng.hpp"
#include "drol/routing_actor.hpp"
#include "drol/transition.hpp"

namespace drol {

enum class EnvKind { IntervalBandit, GridNav };

inline std::string to_string(EnvKind kind) { return kind == EnvKind::GridNav ? "grid_nav" : "interval_bandit"; }

inline EnvKind parse_env_kind(const std::string& s) {
    if (s == "interval_bandit") return EnvKind::IntervalBandit;
    if (s == "grid_nav") return EnvKind::GridNav;
    throw ContractError("unknown env kind '" + s + "'");
}

/**
 * Description of a synthetic offline environment.
 *
 * Interval bandit: one state, one step. Behavior actions are uniform over the
 * mixture of intervals I_m = [c_m - r, c_m + r]. Reward at action a uses the
 * nearest center m:  w_m - (curvature / 2) * (a - c_m - offset_m)^2.
 *
 * Grid navigation: point mass on [0, W]^2 with unit-bounded velocity actions.
 * The behavior policy follows one of two corridor routes (along the bottom
 * edge, or along the left edge) and the reward is the negative distance to the
 * goal divided by W.
 */
struct EnvSpec {
    EnvKind kind = EnvKind::IntervalBandit;
    std::size_t state_dim = 1;
    std::size_t action_dim = 1;
    Vec action_low;
    Vec action_high;
    std::size_t horizon = 1;
    std::uint64_t seed = 0;

    // interval bandit
    Vec centers;
    double mode_radius = 0.1;
    Vec reward_weights;
    double curvature = 2.0;
    Vec reward_offsets;

    // grid navigation
    double width = 0.0;
    Vec start;
    Vec goal;
    double behavior_noise = 0.1;
    double goal_tolerance = 0.5;

    std::size_t num_modes() const { return kind == EnvKind::GridNav ? 2 : centers.size(); }

    friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

inline EnvSpec make_interval_bandit(std::size_t modes, double radius, double gap, const Vec& reward_weights,
                                    std::uint64_t seed, double curvature = 2.0, Vec reward_offsets = {}) {
    require(modes >= 1, "interval bandit needs at least one mode");
    require(radius > 0.0, "mode radius must be positive");
    if (!(gap > 4.0 * radius))
        throw ContractError("interval separation violated: gap " + std::to_string(gap) + " must exceed 4r = " +
                            std::to_string(4.0 * radius));
    require(reward_weights.size() == modes, "one reward weight per mode is required");
    require(curvature > 0.0, "reward curvature must be positive");
    if (reward_offsets.empty()) reward_offsets.assign(modes, 0.0);
    require(reward_offsets.size() == modes, "one reward offset per mode is required");

    EnvSpec env;
    env.kind = EnvKind::IntervalBandit;
    env.state_dim = 1;
    env.action_dim = 1;
    env.horizon = 1;
    env.seed = seed;
    env.mode_radius = radius;
    env.reward_weights = reward_weights;
    env.curvature = curvature;
    env.reward_offsets = std::move(reward_offsets);
    const double mid = 0.5 * static_cast<double>(modes - 1);
    for (std::size_t m = 0; m < modes; ++m) env.centers.push_back((static_cast<double>(m) - mid) * gap);
    env.action_low = {env.centers.front() - 0.5 * gap - radius};
    env.action_high = {env.centers.back() + 0.5 * gap + radius};
    return env;
}

inline EnvSpec make_grid_nav(double width, std::uint64_t seed, Vec start = {}, double behavior_noise = 0.1) {
    require(width >= 1.0, "grid width must be at least 1");
    EnvSpec env;
    env.kind = EnvKind::GridNav;
    env.state_dim = 2;
    env.action_dim = 2;
    env.action_low = {-1.0, -1.0};
    env.action_high = {1.0, 1.0};
    env.width = width;
    env.seed = seed;
    env.start = start.empty() ? Vec{0.0, 0.0} : std::move(start);
    require(env.start.size() == 2, "grid start must be 2-D");
    env.goal = {width, width};
    env.behavior_noise = behavior_noise;
    env.horizon = static_cast<std::size_t>(std::ceil(4.0 * width));
    return env;
}

inline std::size_t nearest_mode(const EnvSpec& env, double action) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < env.centers.size(); ++m)
        if (std::abs(action - env.centers[m]) < std::abs(action - env.centers[best])) best = m;
    return best;
}

inline Vec clip_action(const EnvSpec& env, std::span<const double> action) {
    require(action.size() == env.action_dim, "action has the wrong dimension");
    Vec out(action.begin(), action.end());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::clamp(out[j], env.action_low[j], env.action_high[j]);
    return out;
}

inline double bandit_reward(const EnvSpec& env, double action) {
    const std::size_t m = nearest_mode(env, action);
    const double d = action - env.centers[m] - env.reward_offsets[m];
    return env.reward_weights[m] - 0.5 * env.curvature * d * d;
}

/// Noise-free velocity of grid route `route` (0: bottom edge first, 1: left edge first).
inline Vec route_velocity(const EnvSpec& env, std::span<const double> state, std::size_t route) {
    require(state.size() == 2, "grid state must be 2-D");
    const double w = env.width;
    Vec waypoint = route == 0 ? Vec{w, 0.0} : Vec{0.0, w};
    const bool passed = route == 0 ? state[0] >= w - 1e-9 : state[1] >= w - 1e-9;
    const Vec& target = passed ? env.goal : waypoint;
    Vec v{target[0] - state[0], target[1] - state[1]};
    const double norm = std::hypot(v[0], v[1]);
    if (norm > 1.0) {
        v[0] /= norm;
        v[1] /= norm;
    }
    return v;
}

/// Index of the behavior mode whose neighborhood contains the action, or -1.
inline int support_mode(const EnvSpec& env, std::span<const double> state, std::span<const double> action) {
    if (env.kind == EnvKind::IntervalBandit) {
        const std::size_t m = nearest_mode(env, action[0]);
        return std::abs(action[0] - env.centers[m]) <= env.mode_radius ? static_cast<int>(m) : -1;
    }
    const double tol = 3.0 * env.behavior_noise * std::sqrt(2.0);
    for (std::size_t route = 0; route < 2; ++route) {
        const Vec v = route_velocity(env, state, route);
        if (std::hypot(action[0] - v[0], action[1] - v[1]) <= tol) return static_cast<int>(route);
    }
    return -1;
}

struct StepResult {
    double reward = 0.0;
    Vec next_state;
    bool done = false;
};

inline Vec initial_state(const EnvSpec& env) { return env.kind == EnvKind::GridNav ? env.start : Vec{0.0}; }

/// Executes a (clipped) action. `t` is the zero-based step index within the episode.
inline StepResult env_step(const EnvSpec& env, std::span<const double> state, std::span<const double> action,
                           std::size_t t) {
    const Vec a = clip_action(env, action);
    StepResult out;
    if (env.kind == EnvKind::IntervalBandit) {
        out.reward = bandit_reward(env, a[0]);
        out.next_state = Vec(state.begin(), state.end());
        out.done = true;
        return out;
    }
    out.next_state = {std::clamp(state[0] + a[0], 0.0, env.width), std::clamp(state[1] + a[1], 0.0, env.width)};
    const double dist = std::hypot(out.next_state[0] - env.goal[0], out.next_state[1] - env.goal[1]);
    out.reward = -dist / env.width;
    out.done = dist <= env.goal_tolerance || t + 1 >= env.horizon;
    return out;
}

/// Behavior action for the given mode; bandit modes are intervals, grid modes are routes.
inline Vec behavior_action(const EnvSpec& env, std::span<const double> state, std::size_t mode, Rng& rng) {
    if (env.kind == EnvKind::IntervalBandit)
        return {env.centers[mode] + env.mode_radius * (2.0 * rng.uniform() - 1.0)};
    Vec v = route_velocity(env, state, mode);
    for (auto& x : v) x += env.behavior_noise * rng.normal();
    return clip_action(env, v);
}

struct OfflineDataset {
    EnvSpec env;
    std::uint64_t seed = 0;
    std::vector<Transition> transitions;
    std::vector<int> mode_labels; // diagnostics only, never fed to a learner

    std::size_t size() const { return transitions.size(); }
};

inline OfflineDataset generate_dataset(const EnvSpec& env, std::size_t n, std::uint64_t seed) {
    require(n >= 1, "dataset size must be at least 1");
    OfflineDataset data;
    data.env = env;
    data.seed = seed;
    data.transitions.reserve(n);
    data.mode_labels.reserve(n);
    Rng rng(seed);
    const std::size_t modes = env.num_modes();
    while (data.transitions.size() < n) {
        const std::size_t mode = static_cast<std::size_t>(rng.below(modes));
        Vec state = initial_state(env);
        for (std::size_t t = 0; t < env.horizon && data.transitions.size() < n; ++t) {
            Vec action = behavior_action(env, state, mode, rng);
            StepResult step = env_step(env, state, action, t);
            data.transitions.push_back({state, std::move(action), step.reward, step.next_state, step.done});
            data.mode_labels.push_back(static_cast<int>(mode));
            if (step.done) break;
            state = std::move(step.next_state);
        }
    }
    return data;
}

struct EvalResult {
    double mean_return = 0.0;
    double stddev_return = 0.0;
    double support_violation = 0.0; // fraction of executed actions outside every mode neighborhood
    std::size_t actions = 0;
};

/// Roll out `policy(state, rng) -> action` for the given number of episodes.
template <class Policy>
EvalResult evaluate_policy(const EnvSpec& env, Policy&& policy, std::size_t episodes, std::uint64_t seed) {
    require(episodes >= 1, "evaluation needs at least one episode");
    Rng rng(seed);
    Vec returns;
    returns.reserve(episodes);
    std::size_t violations = 0;
    std::size_t actions = 0;
    for (std::size_t e = 0; e < episodes; ++e) {
        Vec state = initial_state(env);
        double ret = 0.0;
        for (std::size_t t = 0; t < env.horizon; ++t) {
            const Vec action = clip_action(env, policy(std::as_const(state), rng));
            if (support_mode(env, state, action) < 0) ++violations;
            ++actions;
            StepResult step = env_step(env, state, action, t);
            ret += step.reward;
            if (step.done) break;
            state = std::move(step.next_state);
        }
        returns.push_back(ret);
    }
    EvalResult out;
    for (double r : returns) out.mean_return += r;
    out.mean_return /= static_cast<double>(episodes);
    for (double r : returns) out.stddev_return += (r - out.mean_return) * (r - out.mean_return);
    out.stddev_return = std::sqrt(out.stddev_return / static_cast<double>(episodes));
    out.support_violation = static_cast<double>(violations) / static_cast<double>(actions);
    out.actions = actions;
    return out;
}

/// Evaluates the one-step actor: one latent draw per executed action.
inline EvalResult evaluate_policy(const EnvSpec& env, const Mlp& actor, const BallPrior& prior,
                                  std::size_t episodes, std::uint64_t seed) {
    BallPrior local(prior.latent_dim(), prior.radius(), seed ^ 0x5EEDF00DULL);
    return evaluate_policy(
        env, [&](const Vec& state, Rng&) { return act(actor, state, local); }, episodes, seed);
}

} // namespace drol
