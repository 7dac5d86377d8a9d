#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "drol/critic.hpp"
#include "drol/error.hpp"
#include "drol/latent_prior.hpp"
#include "drol/nn.hpp"
#include "drol/transition.hpp"

namespace drol {

/// K actions generated from one state, with the latents that produced them.
struct CandidateSet {
    Vec state;
    std::vector<Vec> latents;
    std::vector<Vec> actions;

    std::size_t size() const { return actions.size(); }
};

/// Winner of top-1 routing and its squared distance to the routed action.
struct RoutingAssignment {
    std::size_t winner = 0;
    double sq_distance = 0.0;
};

struct ActorLossReport {
    double bc = 0.0;     // batch mean of ||x_winner - a||^2
    double q_term = 0.0; // batch mean of Q(s, x_winner)
    double total = 0.0;  // bc - alpha * q_term
    std::vector<std::size_t> winners;
};

enum class ActorMode { Drol, Pointwise };

inline std::string to_string(ActorMode mode) { return mode == ActorMode::Pointwise ? "pointwise" : "drol"; }

inline ActorMode parse_actor_mode(const std::string& s) {
    if (s == "drol") return ActorMode::Drol;
    if (s == "pointwise") return ActorMode::Pointwise;
    throw ContractError("unknown actor mode '" + s + "' (expected drol or pointwise)");
}

/// Actor network shape: (state ++ latent) -> hidden... -> action.
inline Mlp make_actor(std::size_t state_dim, std::size_t latent_dim, std::size_t action_dim,
                      std::span<const std::size_t> hidden, Rng& rng) {
    std::vector<std::size_t> sizes{state_dim + latent_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(action_dim);
    return Mlp(sizes, rng);
}

inline CandidateSet generate_candidates(const Mlp& actor, std::span<const double> state, BallPrior& prior,
                                        std::size_t k) {
    require(k >= 1, "candidate budget K must be at least 1");
    CandidateSet set;
    set.state.assign(state.begin(), state.end());
    set.latents = prior.sample(k);
    set.actions.reserve(k);
    for (const auto& z : set.latents) set.actions.push_back(actor.forward(concat(state, z)));
    return set;
}

/// Nearest candidate under squared Euclidean distance; ties go to the lowest index.
inline RoutingAssignment route(std::span<const Vec> candidates, std::span<const double> data_action) {
    require(!candidates.empty(), "route needs at least one candidate");
    RoutingAssignment best{0, squared_distance(candidates[0], data_action)};
    for (std::size_t k = 1; k < candidates.size(); ++k) {
        require(candidates[k].size() == data_action.size(), "candidate and data action dimensions differ");
        const double d = squared_distance(candidates[k], data_action);
        if (d < best.sq_distance) best = {k, d};
    }
    return best;
}

inline RoutingAssignment route(const CandidateSet& candidates, std::span<const double> data_action) {
    return route(std::span<const Vec>(candidates.actions), data_action);
}

/// Value and per-candidate gradients of the routed loss
///   min_k ||x_k - a||^2 - alpha * Q(x_{k*}).
struct RoutedLoss {
    RoutingAssignment assignment;
    double bc = 0.0;
    double q = 0.0;
    double value = 0.0;
    std::vector<Vec> grads; // one per candidate
};

/// `q_model(x)` must return a QWithGradient for the candidate action x.
template <class QModel>
RoutedLoss routed_loss(std::span<const Vec> candidates, std::span<const double> data_action, double alpha,
                       QModel&& q_model) {
    RoutedLoss out;
    out.assignment = route(candidates, data_action);
    out.grads.assign(candidates.size(), Vec(data_action.size(), 0.0));
    const Vec& x = candidates[out.assignment.winner];
    const QWithGradient q = q_model(x);
    out.bc = out.assignment.sq_distance;
    out.q = q.value;
    out.value = out.bc - alpha * q.value;
    Vec& g = out.grads[out.assignment.winner];
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = 2.0 * (x[j] - data_action[j]) - alpha * q.action_grad[j];
    return out;
}

namespace detail {

// Backpropagate one candidate's action gradient into the actor, scaled by 1/B.
inline void push_action_gradient(Mlp& actor, std::span<const double> state, std::span<const double> latent,
                                 std::span<const double> action_grad, double scale) {
    ForwardCache cache;
    actor.forward(concat(state, latent), cache);
    Vec scaled(action_grad.begin(), action_grad.end());
    for (auto& v : scaled) v *= scale;
    actor.backward(cache, scaled);
}

inline void finish_report(ActorLossReport& report, double alpha, std::size_t batch_size) {
    const double inv_b = 1.0 / static_cast<double>(batch_size);
    report.bc *= inv_b;
    report.q_term *= inv_b;
    report.total = report.bc - alpha * report.q_term;
    if (!std::isfinite(report.total))
        throw NumericError("non-finite actor loss (bc=" + std::to_string(report.bc) +
                           ", q=" + std::to_string(report.q_term) + ")");
}

} // namespace detail

/**
 * Routed actor objective, averaged over the batch:
 *   ||x_{k*} - a||^2 - alpha * Q(s, x_{k*}),  k* = argmin_k ||x_k - a||^2,
 * with K fresh candidates per transition. Gradients reach the actor only through
 * each transition's winner; the argmin itself is not differentiated and the
 * critic is read-only. Gradients accumulate into `actor`.
 */
inline ActorLossReport drol_actor_loss(Mlp& actor, const CriticEnsemble& critic, std::span<const Transition> batch,
                                       BallPrior& prior, std::size_t k, double alpha) {
    require(!batch.empty(), "actor loss needs a non-empty batch");
    require(alpha >= 0.0, "alpha must be non-negative");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    ActorLossReport report;
    report.winners.reserve(batch.size());
    for (const auto& t : batch) {
        const CandidateSet set = generate_candidates(actor, t.state, prior, k);
        const RoutedLoss loss = routed_loss(set.actions, t.action, alpha, [&](const Vec& x) {
            return q_value_and_action_grad(critic, t.state, x);
        });
        const std::size_t w = loss.assignment.winner;
        report.bc += loss.bc;
        report.q_term += loss.q;
        report.winners.push_back(w);
        detail::push_action_gradient(actor, t.state, set.latents[w], loss.grads[w], inv_b);
    }
    detail::finish_report(report, alpha, batch.size());
    return report;
}

/**
 * Pointwise-correspondence baseline: one latent per transition, and the
 * behavior-cloning pull ||x - a||^2 is attached to that sample no matter how
 * far it is from a.
 */
inline ActorLossReport pointwise_actor_loss(Mlp& actor, const CriticEnsemble& critic,
                                            std::span<const Transition> batch, BallPrior& prior, double alpha) {
    require(!batch.empty(), "actor loss needs a non-empty batch");
    require(alpha >= 0.0, "alpha must be non-negative");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    ActorLossReport report;
    report.winners.assign(batch.size(), 0);
    Vec grad;
    for (const auto& t : batch) {
        const Vec z = prior.sample_one();
        const Vec x = actor.forward(concat(t.state, z));
        const QWithGradient q = q_value_and_action_grad(critic, t.state, x);
        report.bc += squared_distance(x, t.action);
        report.q_term += q.value;
        grad.assign(x.size(), 0.0);
        for (std::size_t j = 0; j < x.size(); ++j) grad[j] = 2.0 * (x[j] - t.action[j]) - alpha * q.action_grad[j];
        detail::push_action_gradient(actor, t.state, z, grad, inv_b);
    }
    detail::finish_report(report, alpha, batch.size());
    return report;
}

/// One-step policy: one latent draw, one forward pass.
inline Vec act(const Mlp& actor, std::span<const double> state, BallPrior& prior) {
    return actor.forward(concat(state, prior.sample_one()));
}

} // namespace drol
