#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "drol/error.hpp"
#include "drol/latent_prior.hpp"
#include "drol/nn.hpp"
#include "drol/routing_actor.hpp"
#include "drol/transition.hpp"

namespace drol {

struct CandidateDiagnostics {
    std::optional<double> pairwise;  // mean ||x_i - x_j||^2 / d_a over ordered pairs i != j; absent for K < 2
    double centroid_divergence = 0.0; // mean ||x_k - mean||^2 / d_a
};

inline CandidateDiagnostics candidate_diagnostics(std::span<const Vec> actions, std::size_t action_dim) {
    require(!actions.empty(), "candidate diagnostics need at least one candidate");
    require(action_dim >= 1, "action dimension must be positive");
    const std::size_t k = actions.size();
    const double da = static_cast<double>(action_dim);

    Vec centroid(action_dim, 0.0);
    for (const auto& x : actions) {
        require(x.size() == action_dim, "candidate has the wrong dimension");
        for (std::size_t j = 0; j < action_dim; ++j) centroid[j] += x[j];
    }
    for (auto& c : centroid) c /= static_cast<double>(k);

    CandidateDiagnostics out;
    for (const auto& x : actions) out.centroid_divergence += squared_distance(x, centroid);
    out.centroid_divergence /= static_cast<double>(k) * da;

    if (k >= 2) {
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = i + 1; j < k; ++j) sum += 2.0 * squared_distance(actions[i], actions[j]);
        out.pairwise = sum / (static_cast<double>(k * (k - 1)) * da);
    }
    return out;
}

inline CandidateDiagnostics candidate_diagnostics(const CandidateSet& set, std::size_t action_dim) {
    return candidate_diagnostics(std::span<const Vec>(set.actions), action_dim);
}

/**
 * Mean routed BC loss of a frozen actor for each budget in `budgets`.
 *
 * Each transition gets one pool of max(budgets) latents; budget K uses the
 * first K of them, so the estimates share random numbers across budgets.
 */
inline Vec routed_bc_probe(const Mlp& actor, BallPrior& prior, std::span<const Transition> data,
                           std::span<const std::size_t> budgets) {
    require(!data.empty() && !budgets.empty(), "routed BC probe needs data and budgets");
    std::size_t k_max = 0;
    for (std::size_t k : budgets) {
        require(k >= 1, "budget must be at least 1");
        k_max = std::max(k_max, k);
    }
    Vec totals(budgets.size(), 0.0);
    for (const auto& t : data) {
        const CandidateSet pool = generate_candidates(actor, t.state, prior, k_max);
        for (std::size_t b = 0; b < budgets.size(); ++b) {
            const std::span<const Vec> first(pool.actions.data(), budgets[b]);
            totals[b] += route(first, t.action).sq_distance;
        }
    }
    for (auto& v : totals) v /= static_cast<double>(data.size());
    return totals;
}

/// Winner index of each probe action at each checkpoint, with candidate latents held fixed.
struct VoronoiTrace {
    Vec probe_state;
    std::vector<Vec> latents;
    std::vector<Vec> probe_actions;
    std::vector<std::size_t> steps;
    std::vector<std::vector<std::size_t>> winners; // [checkpoint][action]
    std::vector<std::vector<Vec>> candidates;      // [checkpoint][k]

    /// Number of (action, consecutive checkpoint pair) where the winner changed.
    std::size_t handoff_events() const {
        std::size_t events = 0;
        for (std::size_t c = 1; c < winners.size(); ++c)
            for (std::size_t i = 0; i < winners[c].size(); ++i)
                if (winners[c][i] != winners[c - 1][i]) ++events;
        return events;
    }
};

struct ActorCheckpoint {
    std::size_t step = 0;
    Mlp actor;
};

inline VoronoiTrace voronoi_trace(std::span<const ActorCheckpoint> checkpoints, BallPrior& prior, std::size_t k,
                                  std::span<const double> probe_state, std::span<const Vec> probe_actions) {
    require(k >= 1, "candidate budget K must be at least 1");
    VoronoiTrace trace;
    trace.probe_state.assign(probe_state.begin(), probe_state.end());
    trace.latents = prior.sample(k);
    trace.probe_actions.assign(probe_actions.begin(), probe_actions.end());
    for (const auto& ckpt : checkpoints) {
        std::vector<Vec> cands;
        cands.reserve(k);
        for (const auto& z : trace.latents) cands.push_back(ckpt.actor.forward(concat(probe_state, z)));
        std::vector<std::size_t> w;
        w.reserve(probe_actions.size());
        for (const auto& a : probe_actions) w.push_back(route(std::span<const Vec>(cands), a).winner);
        trace.steps.push_back(ckpt.step);
        trace.winners.push_back(std::move(w));
        trace.candidates.push_back(std::move(cands));
    }
    return trace;
}

} // namespace drol
