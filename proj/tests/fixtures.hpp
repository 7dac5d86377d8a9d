#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <array>
#include <cmath>
#include <vector>

#include "drol/critic.hpp"
#include "drol/nn.hpp"
#include "drol/transition.hpp"

namespace drol::fixtures {

/// Deterministic two-state chain: s0 -> s1 with reward 0, s1 -> s1 with reward 1.
/// States are one-hot; the single action is the scalar 0.
struct TwoStateChain {
    std::array<Vec, 2> states{Vec{1.0, 0.0}, Vec{0.0, 1.0}};
    std::array<int, 2> next{1, 1};
    std::array<double, 2> reward{0.0, 1.0};

    std::vector<Transition> transitions() const {
        std::vector<Transition> out;
        for (int s = 0; s < 2; ++s) out.push_back({states[s], {0.0}, reward[s], states[next[s]], false});
        return out;
    }

    /// Tabular value iteration to machine precision.
    std::array<double, 2> value_iteration(double gamma) const {
        std::array<double, 2> q{0.0, 0.0};
        for (int it = 0; it < 100000; ++it) {
            std::array<double, 2> n{};
            for (int s = 0; s < 2; ++s) n[s] = reward[s] + gamma * q[next[s]];
            const double delta = std::max(std::abs(n[0] - q[0]), std::abs(n[1] - q[1]));
            q = n;
            if (delta < 1e-13) break;
        }
        return q;
    }
};

/// Actor that ignores its input and always outputs zero.
inline Mlp zero_actor(std::size_t state_dim, std::size_t latent_dim, std::size_t action_dim) {
    return Mlp::zeros({state_dim + latent_dim, 4, action_dim});
}

/// Train a critic on the chain; returns online Q at both states.
inline std::array<double, 2> fit_chain_critic(double gamma, std::size_t steps, std::uint64_t seed) {
    TwoStateChain chain;
    Rng rng(seed);
    const std::vector<std::size_t> hidden{32, 32};
    CriticEnsemble critic = CriticEnsemble::make(2, 1, hidden, 2, rng, 1e-3, gamma, 0.02);
    const Mlp actor = zero_actor(2, 1, 1);
    BallPrior prior = BallPrior::for_action_dim(1, seed + 1);
    const auto batch = chain.transitions();
    for (std::size_t t = 0; t < steps; ++t) {
        critic_update(critic, actor, batch, prior);
        update_targets(critic);
    }
    return {q_value(critic, chain.states[0], Vec{0.0}), q_value(critic, chain.states[1], Vec{0.0})};
}

} // namespace drol::fixtures
