#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "drol/error.hpp"
#include "drol/latent_prior.hpp"
#include "drol/nn.hpp"
#include "drol/transition.hpp"

namespace drol {

enum class QAggregation { Mean, Min };
enum class CriticNets { Online, Target };

inline std::string to_string(QAggregation agg) { return agg == QAggregation::Min ? "min" : "mean"; }

inline QAggregation parse_aggregation(const std::string& s) {
    if (s == "mean") return QAggregation::Mean;
    if (s == "min") return QAggregation::Min;
    throw ContractError("unknown q aggregation '" + s + "' (expected mean or min)");
}

/// Aggregated critic value plus its gradient with respect to the action input.
struct QWithGradient {
    double value = 0.0;
    Vec action_grad;
};

/**
 * Ensemble of Q(s, a) networks with Polyak-averaged targets.
 *
 * Each member sees state and action concatenated and returns one scalar.
 * Aggregation (mean or min) is fixed for the lifetime of the ensemble.
 */
struct CriticEnsemble {
    std::vector<Mlp> online;
    std::vector<Mlp> target;
    std::vector<AdamState> optim;
    QAggregation aggregation = QAggregation::Mean;
    double gamma = 0.99;
    double tau = 0.005;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;

    static CriticEnsemble make(std::size_t state_dim, std::size_t action_dim, std::span<const std::size_t> hidden,
                               std::size_t members, Rng& rng, double lr = 3e-4, double gamma = 0.99,
                               double tau = 0.005, QAggregation agg = QAggregation::Mean) {
        require(members >= 1, "critic ensemble needs at least one member");
        require(gamma >= 0.0 && gamma < 1.0, "discount must lie in [0, 1)");
        require(tau > 0.0 && tau <= 1.0, "target rate must lie in (0, 1]");
        CriticEnsemble c;
        c.aggregation = agg;
        c.gamma = gamma;
        c.tau = tau;
        c.state_dim = state_dim;
        c.action_dim = action_dim;
        std::vector<std::size_t> sizes{state_dim + action_dim};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(1);
        for (std::size_t m = 0; m < members; ++m) {
            c.online.emplace_back(sizes, rng);
            c.target.push_back(c.online.back());
            c.optim.emplace_back(lr);
        }
        return c;
    }

    std::size_t size() const { return online.size(); }

    double aggregate(std::span<const double> values) const {
        double out = values[0];
        if (aggregation == QAggregation::Min) {
            for (double v : values) out = std::min(out, v);
            return out;
        }
        for (std::size_t i = 1; i < values.size(); ++i) out += values[i];
        return out / static_cast<double>(values.size());
    }

    void check_dims(std::span<const double> state, std::span<const double> action) const {
        if (state.size() != state_dim || action.size() != action_dim)
            throw ContractError("critic input dimension mismatch");
    }
};

inline double q_value(const CriticEnsemble& critic, std::span<const double> state, std::span<const double> action,
                      CriticNets which = CriticNets::Online) {
    critic.check_dims(state, action);
    const auto& nets = which == CriticNets::Online ? critic.online : critic.target;
    const Vec input = concat(state, action);
    Vec values;
    values.reserve(nets.size());
    for (const auto& net : nets) values.push_back(net.forward(input)[0]);
    return critic.aggregate(values);
}

/// Online aggregated Q and dQ/da. Critic parameters are not touched.
/// Under min aggregation the gradient follows the first minimizing member.
inline QWithGradient q_value_and_action_grad(const CriticEnsemble& critic, std::span<const double> state,
                                             std::span<const double> action) {
    critic.check_dims(state, action);
    const Vec input = concat(state, action);
    const std::size_t n = critic.online.size();
    std::vector<ForwardCache> caches(n);
    Vec values(n);
    for (std::size_t m = 0; m < n; ++m) values[m] = critic.online[m].forward(input, caches[m])[0];

    QWithGradient out;
    out.value = critic.aggregate(values);
    out.action_grad.assign(critic.action_dim, 0.0);
    const double unit = 1.0;
    auto add_member = [&](std::size_t m, double weight) {
        const Vec g = critic.online[m].input_gradient(caches[m], std::span<const double>(&unit, 1));
        for (std::size_t j = 0; j < critic.action_dim; ++j) out.action_grad[j] += weight * g[critic.state_dim + j];
    };
    if (critic.aggregation == QAggregation::Min) {
        std::size_t best = 0;
        for (std::size_t m = 1; m < n; ++m)
            if (values[m] < values[best]) best = m;
        add_member(best, 1.0);
    } else {
        for (std::size_t m = 0; m < n; ++m) add_member(m, 1.0 / static_cast<double>(n));
    }
    return out;
}

/**
 * One Bellman regression step for every online member.
 *
 * Shared target: r + gamma * (1 - done) * Q_target(s', a') with a' = f(s', z'),
 * a single latent draw per transition. Targets are not moved here; call
 * update_targets afterwards. Returns the TD loss averaged over members.
 */
inline double critic_update(CriticEnsemble& critic, const Mlp& actor, std::span<const Transition> batch,
                            BallPrior& prior) {
    require(!batch.empty(), "critic_update needs a non-empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    Vec targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = batch[i];
        const Vec z = prior.sample_one();
        const Vec next_action = actor.forward(concat(t.next_state, z));
        double y = t.reward;
        if (!t.done) y += critic.gamma * q_value(critic, t.next_state, next_action, CriticNets::Target);
        targets[i] = y;
    }

    double td_loss = 0.0;
    ForwardCache cache;
    for (std::size_t m = 0; m < critic.size(); ++m) {
        Mlp& net = critic.online[m];
        double member_loss = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const Transition& t = batch[i];
            critic.check_dims(t.state, t.action);
            const double q = net.forward(concat(t.state, t.action), cache)[0];
            const double err = q - targets[i];
            member_loss += err * err * inv_b;
            const double g = 2.0 * err * inv_b;
            net.backward(cache, std::span<const double>(&g, 1));
        }
        if (!std::isfinite(member_loss)) throw NumericError("non-finite TD loss in critic member " + std::to_string(m));
        td_loss += member_loss;
    }
    for (std::size_t m = 0; m < critic.size(); ++m) adam_step(critic.online[m], critic.optim[m]);
    return td_loss / static_cast<double>(critic.size());
}

inline void update_targets(CriticEnsemble& critic) {
    for (std::size_t m = 0; m < critic.size(); ++m) polyak_update(critic.target[m], critic.online[m], critic.tau);
}

} // namespace drol
