#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "drol/theory.hpp"

using namespace drol;
using namespace drol::theory;

TEST(IntervalDistortion, ClosedForm) {
    EXPECT_DOUBLE_EQ(interval_distortion(0.1, 1), 0.01 / 3.0);
    EXPECT_DOUBLE_EQ(interval_distortion(0.1, 2), 0.01 / 12.0);
    EXPECT_DOUBLE_EQ(interval_distortion(0.3, 3), 0.09 / 27.0);
    EXPECT_THROW(interval_distortion(0.1, 0), ContractError);
}

TEST(RoutedDistortion, SinglePrototypeAtCenter) {
    auto cfg = QuantizerConfig::evenly_spaced(1, 0.2, 1.0);
    const Vec p{0.0};
    EXPECT_NEAR(routed_distortion(p, cfg), 0.04 / 3.0, 1e-10);
    // Off-center by d adds d^2.
    const Vec q{0.05};
    EXPECT_NEAR(routed_distortion(q, cfg), 0.04 / 3.0 + 0.0025, 1e-10);
}

TEST(RoutedDistortion, EqualCellsGiveClosedForm) {
    for (std::size_t q = 1; q <= 4; ++q) {
        auto cfg = QuantizerConfig::evenly_spaced(1, 0.1, 1.0);
        Vec p;
        for (std::size_t j = 0; j < q; ++j) p.push_back(-0.1 + (j + 0.5) * 0.2 / q);
        EXPECT_NEAR(routed_distortion(p, cfg) / interval_distortion(0.1, q), 1.0, 1e-6) << "q=" << q;
    }
}

TEST(RoutedDistortion, FarPrototypeCostsSquaredDistance) {
    // Interval [-r, r] served by a point at distance c: E (c - a)^2 = c^2 + r^2 / 3.
    QuantizerConfig cfg;
    cfg.centers = {0.0};
    cfg.radius = 0.1;
    const Vec p{1.0};
    EXPECT_NEAR(routed_distortion(p, cfg), 1.0 + 0.01 / 3.0, 1e-9);
}

TEST(QuantizerConfig, Validation) {
    EXPECT_THROW(QuantizerConfig::evenly_spaced(2, 0.1, 0.4), ContractError);
    EXPECT_THROW(QuantizerConfig::evenly_spaced(0, 0.1, 1.0), ContractError);
    QuantizerConfig c;
    c.centers = {1.0, 0.0};
    EXPECT_THROW(c.validate(), ContractError);
}

TEST(BruteForce, OnePerIntervalWhenKEqualsM) {
    for (std::size_t m = 2; m <= 4; ++m) {
        const auto cfg = QuantizerConfig::evenly_spaced(m, 0.1, 1.0);
        const auto opt = optimal_quantizer_bruteforce(cfg, m);
        EXPECT_EQ(opt.allocation, std::vector<std::size_t>(m, 1));
        EXPECT_NEAR(opt.distortion, 0.01 / 3.0, 1e-15);
        for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(opt.prototypes[i], cfg.centers[i], 1e-15);
    }
}

TEST(BruteForce, SpareBudgetIsSpreadEvenly) {
    const auto cfg = QuantizerConfig::evenly_spaced(2, 0.1, 1.0);
    const auto opt = optimal_quantizer_bruteforce(cfg, 4);
    EXPECT_EQ(opt.allocation, (std::vector<std::size_t>{2, 2}));
    // 2 + 3 beats 1 + 4 since 1/4 + 1/9 < 1 + 1/16.
    const auto five = optimal_quantizer_bruteforce(cfg, 5);
    EXPECT_EQ(five.allocation[0] + five.allocation[1], 5u);
    EXPECT_EQ(std::max(five.allocation[0], five.allocation[1]), 3u);
    EXPECT_NEAR(five.distortion, (0.01 / 12.0 + 0.01 / 27.0) / 2.0, 1e-15);
}

TEST(BruteForce, AgreesWithNumericDistortionAtItsPrototypes) {
    const auto cfg = QuantizerConfig::evenly_spaced(3, 0.1, 1.0);
    for (std::size_t k : {3u, 5u, 7u}) {
        const auto opt = optimal_quantizer_bruteforce(cfg, k);
        EXPECT_NEAR(routed_distortion(opt.prototypes, cfg) / opt.distortion, 1.0, 1e-6);
    }
}

TEST(BruteForce, Contracts) {
    const auto cfg = QuantizerConfig::evenly_spaced(3, 0.1, 1.0);
    EXPECT_THROW(optimal_quantizer_bruteforce(cfg, 2), ContractError);
    EXPECT_THROW(optimal_quantizer_bruteforce(cfg, 200, 100), ContractError);
}

TEST(BruteForce, CollapsedConfigurationsPayTheGap) {
    // Two prototypes in one interval, one interval empty: the excess over the
    // optimum is at least 3 r^2 / (4 M).
    const double r = 0.1;
    for (std::size_t m = 2; m <= 4; ++m) {
        const auto cfg = QuantizerConfig::evenly_spaced(m, r, 1.0);
        const double best = optimal_quantizer_bruteforce(cfg, m).distortion;
        for (std::size_t crowded = 0; crowded < m; ++crowded) {
            for (std::size_t empty = 0; empty < m; ++empty) {
                if (empty == crowded) continue;
                Vec p;
                for (std::size_t i = 0; i < m; ++i) {
                    if (i == empty) continue;
                    if (i == crowded) {
                        p.push_back(cfg.centers[i] - r / 2);
                        p.push_back(cfg.centers[i] + r / 2);
                    } else {
                        p.push_back(cfg.centers[i]);
                    }
                }
                EXPECT_GE(routed_distortion(p, cfg) - best, 3 * r * r / (4.0 * m) - 1e-6);
            }
        }
    }
}

TEST(Tether, MinimizerClosedForm) {
    const Vec a{0.0, 1.0}, xq{1.0, -1.0};
    const Vec x = fixed_tether_minimizer(a, xq, 1.0, 2.0);
    EXPECT_DOUBLE_EQ(x[0], 0.5);
    EXPECT_DOUBLE_EQ(x[1], 0.0);
    // alpha = 0 returns the data action.
    EXPECT_EQ(fixed_tether_minimizer(a, xq, 0.0, 3.0), a);
    EXPECT_DOUBLE_EQ(tether_bias_ratio(1.0, 2.0), 0.5);
    EXPECT_THROW(fixed_tether_minimizer(a, xq, 1.0, 0.0), ContractError);
    EXPECT_THROW(fixed_tether_minimizer(a, Vec{1.0}, 1.0, 1.0), ContractError);
}

TEST(Tether, GradientDescentConvergesToMinimizer) {
    // l(x) = ||x - a||^2 + alpha (m/2) ||x - x_q||^2, gradient descent from a.
    const Vec a{0.3, -0.7}, xq{1.2, 0.4};
    for (auto [alpha, m] : {std::pair{1.0, 2.0}, {0.3, 1.0}, {10.0, 0.5}}) {
        Vec x = a;
        const double lr = 1.0 / (2.0 + alpha * m) * 0.5;
        for (int it = 0; it < 2000; ++it)
            for (int j = 0; j < 2; ++j) x[j] -= lr * (2 * (x[j] - a[j]) + alpha * m * (x[j] - xq[j]));
        const Vec star = fixed_tether_minimizer(a, xq, alpha, m);
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(x[j], star[j], 1e-10);
        const double ratio = std::hypot(x[0] - xq[0], x[1] - xq[1]) / std::hypot(a[0] - xq[0], a[1] - xq[1]);
        EXPECT_NEAR(ratio, tether_bias_ratio(alpha, m), 1e-10);
    }
}

TEST(Coverage, HandValues) {
    const Vec p{0.5, 0.5};
    EXPECT_DOUBLE_EQ(coverage_bound(p, 1), 0.0);
    EXPECT_DOUBLE_EQ(coverage_bound(p, 2), 0.5);
    EXPECT_NEAR(coverage_exponential_bound(p, 2), 1.0 - 2.0 * std::exp(-1.0), 1e-15);
    const Vec q{0.2, 0.2, 0.2};
    EXPECT_NEAR(coverage_bound(q, 16), 1.0 - 3.0 * std::pow(0.8, 16), 1e-15);
}

TEST(Coverage, UnionBoundDominatesExponential) {
    for (std::size_t k : {1u, 2u, 4u, 16u, 64u}) {
        for (const Vec& p : {Vec{0.2, 0.5}, Vec{0.2, 0.2, 0.2}, Vec{0.5, 0.5}, Vec{0.1, 0.3, 0.6}}) {
            EXPECT_GE(coverage_bound(p, k), coverage_exponential_bound(p, k));
        }
    }
}

TEST(Coverage, MonteCarloMatchesExactTwoModeValue) {
    // Exact P(hit both) for two modes: 1 - (1-p1)^K - (1-p2)^K + (1-p1-p2)^K.
    const Vec p{0.2, 0.5};
    const std::size_t k = 4;
    const double exact = 1 - std::pow(0.8, 4) - std::pow(0.5, 4) + std::pow(0.3, 4);
    const auto est = coverage_montecarlo(p, k, 200000, 3);
    EXPECT_NEAR(est.frequency, exact, 4 * est.std_error);
    EXPECT_GE(exact, coverage_bound(p, k));
}

TEST(Coverage, Contracts) {
    EXPECT_THROW(coverage_bound(Vec{}, 3), ContractError);
    EXPECT_THROW(coverage_bound(Vec{0.0, 0.5}, 3), ContractError);
    EXPECT_THROW(coverage_bound(Vec{0.6, 0.6}, 3), ContractError);
    EXPECT_THROW(coverage_montecarlo(Vec{0.5}, 3, 0, 1), ContractError);
}

TEST(Coverage, MonteCarloIsDeterministic) {
    const Vec p{0.2, 0.2};
    EXPECT_EQ(coverage_montecarlo(p, 4, 1000, 5).frequency, coverage_montecarlo(p, 4, 1000, 5).frequency);
}
