#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "drol/critic.hpp"
#include "drol/routing_actor.hpp"

using namespace drol;

namespace {

QWithGradient quadratic_q(const Vec& x, double peak) {
    return {-(x[0] - peak) * (x[0] - peak), Vec{-2.0 * (x[0] - peak)}};
}

std::vector<std::size_t> hidden16() { return {16, 16}; }

} // namespace

TEST(Route, NearestCandidate) {
    const std::vector<Vec> c{{0.0}, {1.0}};
    const auto r = route(c, Vec{0.2});
    EXPECT_EQ(r.winner, 0u);
    EXPECT_NEAR(r.sq_distance, 0.04, 1e-15);
}

TEST(Route, TiesGoToLowestIndex) {
    EXPECT_EQ(route(std::vector<Vec>{{0.0}, {1.0}}, Vec{0.5}).winner, 0u);
    EXPECT_EQ(route(std::vector<Vec>{{3.0}, {1.0}, {1.0}}, Vec{1.0}).winner, 1u);
}

TEST(Route, AgreesWithBruteForce) {
    Rng rng(21);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t k = 1 + rng.below(10), d = 1 + rng.below(4);
        std::vector<Vec> c(k, Vec(d));
        for (auto& x : c)
            for (auto& v : x) v = std::round(rng.uniform(-3, 3) * 2) / 2; // coarse grid forces ties
        Vec a(d);
        for (auto& v : a) v = std::round(rng.uniform(-3, 3) * 2) / 2;
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t i = 0; i < k; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < d; ++j) s += (c[i][j] - a[j]) * (c[i][j] - a[j]);
            if (s < best_d) best_d = s, best = i;
        }
        const auto r = route(c, a);
        EXPECT_EQ(r.winner, best);
        EXPECT_EQ(r.sq_distance, best_d);
    }
}

TEST(Route, ErrorsOnEmptyOrMismatched) {
    EXPECT_THROW(route(std::vector<Vec>{}, Vec{0.0}), ContractError);
    EXPECT_THROW(route(std::vector<Vec>{{0.0}, {1.0, 2.0}}, Vec{0.0}), ContractError);
}

TEST(RoutedLoss, HandComputedTwoCandidateExample) {
    const std::vector<Vec> c{{0.0}, {10.0}};
    const double alpha = 0.7;
    const auto loss = routed_loss(c, Vec{1.0}, alpha, [](const Vec& x) { return quadratic_q(x, 2.0); });
    EXPECT_EQ(loss.assignment.winner, 0u);
    EXPECT_DOUBLE_EQ(loss.grads[0][0], 2.0 * (0.0 - 1.0) - alpha * (-2.0 * (0.0 - 2.0)));
    EXPECT_EQ(loss.grads[1][0], 0.0);
    EXPECT_DOUBLE_EQ(loss.value, 1.0 - alpha * -4.0);
}

TEST(RoutedLoss, PerfectActorWithoutCriticHasZeroLossAndGradient) {
    const std::vector<Vec> c{{0.3, -1.0}, {2.0, 2.0}};
    const auto loss = routed_loss(c, Vec{0.3, -1.0}, 0.0, [](const Vec&) { return QWithGradient{5.0, {1.0, 1.0}}; });
    EXPECT_EQ(loss.value, 0.0);
    for (const auto& g : loss.grads)
        for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(RoutedLoss, NonWinnersGetExactlyZero) {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.below(15);
        std::vector<Vec> c(k, Vec(2));
        for (auto& x : c)
            for (auto& v : x) v = rng.uniform(-2, 2);
        const Vec a{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const auto loss = routed_loss(c, a, 0.0, [](const Vec&) { return QWithGradient{0.0, {0.0, 0.0}}; });
        for (std::size_t i = 0; i < k; ++i) {
            if (i == loss.assignment.winner) continue;
            for (double v : loss.grads[i]) ASSERT_EQ(v, 0.0);
        }
    }
}

TEST(ActorLoss, KEqualsOneMatchesPointwise) {
    Rng rng(41);
    const auto h = hidden16();
    Mlp actor = make_actor(1, 1, 1, h, rng);
    CriticEnsemble critic = CriticEnsemble::make(1, 1, h, 2, rng);
    std::vector<Transition> batch;
    for (int i = 0; i < 8; ++i) batch.push_back({{0.0}, {rng.uniform(-1, 1)}, 0.0, {0.0}, true});

    Mlp a1 = actor, a2 = actor;
    BallPrior p1 = BallPrior::for_action_dim(1, 5), p2 = BallPrior::for_action_dim(1, 5);
    const auto r1 = drol_actor_loss(a1, critic, batch, p1, 1, 0.5);
    const auto r2 = pointwise_actor_loss(a2, critic, batch, p2, 0.5);
    EXPECT_DOUBLE_EQ(r1.total, r2.total);
    EXPECT_EQ(a1, a2);
    for (std::size_t l = 0; l < a1.num_layers(); ++l)
        EXPECT_EQ(a1.layers()[l].weight_grad, a2.layers()[l].weight_grad);
}

TEST(ActorLoss, ReportIsConsistent) {
    Rng rng(42);
    const auto h = hidden16();
    Mlp actor = make_actor(2, 2, 2, h, rng);
    CriticEnsemble critic = CriticEnsemble::make(2, 2, h, 2, rng);
    std::vector<Transition> batch;
    for (int i = 0; i < 16; ++i)
        batch.push_back({{rng.uniform(), rng.uniform()}, {rng.uniform(-1, 1), rng.uniform(-1, 1)}, 0.0, {0.0, 0.0}, true});
    BallPrior prior = BallPrior::for_action_dim(2, 3);
    const auto r = drol_actor_loss(actor, critic, batch, prior, 6, 0.3);
    EXPECT_EQ(r.winners.size(), batch.size());
    for (auto w : r.winners) EXPECT_LT(w, 6u);
    EXPECT_GE(r.bc, 0.0);
    EXPECT_NEAR(r.total, r.bc - 0.3 * r.q_term, 1e-14);
}

TEST(ActorLoss, MatchesFiniteDifferencesOfRoutedObjective) {
    // With the latent draws fixed (same prior seed), the routed loss is a.e.
    // differentiable in the actor parameters and the winner does not change
    // under a tiny perturbation.
    Rng rng(43);
    const auto h = hidden16();
    Mlp actor = make_actor(1, 1, 1, h, rng);
    CriticEnsemble critic = CriticEnsemble::make(1, 1, h, 2, rng);
    std::vector<Transition> batch;
    for (int i = 0; i < 6; ++i) batch.push_back({{0.5}, {rng.uniform(-1, 1)}, 0.0, {0.5}, true});
    const double alpha = 0.8;
    auto loss_at = [&](Mlp& net) {
        BallPrior p = BallPrior::for_action_dim(1, 99);
        const auto r = drol_actor_loss(net, critic, batch, p, 4, alpha);
        net.zero_grad();
        return r.total;
    };
    Mlp analytic = actor;
    BallPrior p = BallPrior::for_action_dim(1, 99);
    drol_actor_loss(analytic, critic, batch, p, 4, alpha);

    const double step = 1e-6;
    for (std::size_t l = 0; l < actor.num_layers(); ++l) {
        for (std::size_t i = 0; i < actor.layers()[l].weight.size(); i += 7) {
            Mlp up = actor, down = actor;
            up.layers()[l].weight[i] += step;
            down.layers()[l].weight[i] -= step;
            const double fd = (loss_at(up) - loss_at(down)) / (2 * step);
            EXPECT_NEAR(analytic.layers()[l].weight_grad[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(Candidates, ShapesAndDeterminism) {
    Rng rng(44);
    const auto h = hidden16();
    Mlp actor = make_actor(3, 2, 2, h, rng);
    BallPrior p1 = BallPrior::for_action_dim(2, 8), p2 = BallPrior::for_action_dim(2, 8);
    const Vec s{0.1, 0.2, 0.3};
    const auto c1 = generate_candidates(actor, s, p1, 5);
    const auto c2 = generate_candidates(actor, s, p2, 5);
    ASSERT_EQ(c1.size(), 5u);
    EXPECT_EQ(c1.actions, c2.actions);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(c1.actions[k], actor.forward(concat(s, c1.latents[k])));
    EXPECT_THROW(generate_candidates(actor, s, p1, 0), ContractError);
}

TEST(ActorMode, ParsesAndPrints) {
    EXPECT_EQ(parse_actor_mode("drol"), ActorMode::Drol);
    EXPECT_EQ(parse_actor_mode(to_string(ActorMode::Pointwise)), ActorMode::Pointwise);
    EXPECT_THROW(parse_actor_mode("tether"), ContractError);
}
