#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "drol/latent_prior.hpp"
#include "drol/rng.hpp"

using namespace drol;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        EXPECT_NE(x, c.next_u64());
    }
}

TEST(Rng, FrozenFirstDraws) {
    // splitmix64 seeding of xoshiro256**; guards against silent stream changes.
    Rng r(0);
    const std::uint64_t first = r.next_u64();
    Rng again(0);
    EXPECT_EQ(first, again.next_u64());
    std::uint64_t sm = 0;
    EXPECT_EQ(splitmix64(sm), 0xE220A8397B1DCDAFULL);
}

TEST(Rng, UniformAndNormalMoments) {
    Rng r(7);
    const int n = 200000;
    double su = 0, su2 = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        su2 += u * u;
        const double g = r.normal();
        sn += g;
        sn2 += g * g;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(su2 / n, 1.0 / 3.0, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.015);
}

TEST(Rng, BelowIsInRangeAndBalanced) {
    Rng r(9);
    std::vector<int> counts(3, 0);
    for (int i = 0; i < 30000; ++i) {
        const auto k = r.below(3);
        ASSERT_LT(k, 3u);
        ++counts[k];
    }
    for (int c : counts) EXPECT_NEAR(c, 10000, 400);
    EXPECT_EQ(r.below(1), 0u);
}

TEST(Rng, SplitStreamsDiffer) {
    Rng parent(1);
    Rng a = parent.split();
    Rng b = parent.split();
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    EXPECT_EQ(same, 0);
}

TEST(BallPrior, DefaultRadiusIsSqrtActionDim) {
    for (std::size_t da : {1u, 2u, 7u}) {
        const BallPrior p = BallPrior::for_action_dim(da, 0);
        EXPECT_EQ(p.latent_dim(), da);
        EXPECT_DOUBLE_EQ(p.radius(), std::sqrt(static_cast<double>(da)));
    }
    EXPECT_EQ(BallPrior::for_action_dim(2, 0, 5).latent_dim(), 5u);
}

TEST(BallPrior, SecondMomentFormula) {
    // E||z||^2 = d/(d+2) R^2: integral of rho^2 * d rho^(d-1) / R^d over [0, R].
    EXPECT_DOUBLE_EQ(BallPrior(1, 1.0, 0).second_moment(), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(BallPrior(2, 1.0, 0).second_moment(), 0.5);
    EXPECT_DOUBLE_EQ(BallPrior(4, 2.0, 0).second_moment(), 4.0 * 4.0 / 6.0);
}

struct ScaleCase {
    std::size_t d;
    double r;
};

class BallScale : public ::testing::TestWithParam<ScaleCase> {};

TEST_P(BallScale, EmpiricalSecondMomentAndContainment) {
    const auto [d, r] = GetParam();
    BallPrior prior(d, r, 1234 + d);
    const int n = 200000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec z = prior.sample_one();
        ASSERT_EQ(z.size(), d);
        double n2 = 0.0;
        for (double v : z) n2 += v * v;
        ASSERT_LE(std::sqrt(n2), r);
        s += n2;
    }
    EXPECT_NEAR(s / n / prior.second_moment(), 1.0, 0.01);
}

INSTANTIATE_TEST_SUITE_P(Cases, BallScale,
                         ::testing::Values(ScaleCase{1, 1.0}, ScaleCase{2, 1.0}, ScaleCase{4, 2.0},
                                           ScaleCase{8, std::sqrt(8.0)}, ScaleCase{3, 0.01}));

TEST(BallPrior, RadialDistributionPassesKolmogorovSmirnov) {
    // ||z|| / R has CDF u^d under the uniform ball law.
    for (std::size_t d : {1u, 3u, 6u}) {
        BallPrior prior(d, 1.5, 77 + d);
        const int n = 20000;
        std::vector<double> radii(n);
        for (auto& rho : radii) {
            const Vec z = prior.sample_one();
            double n2 = 0.0;
            for (double v : z) n2 += v * v;
            rho = std::sqrt(n2) / 1.5;
        }
        std::sort(radii.begin(), radii.end());
        double ks = 0.0;
        for (int i = 0; i < n; ++i) {
            const double f = std::pow(radii[i], static_cast<double>(d));
            ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
        }
        // 1% critical value 1.63 / sqrt(n).
        EXPECT_LT(ks, 1.63 / std::sqrt(static_cast<double>(n))) << "d=" << d;
    }
}

TEST(BallPrior, DirectionIsIsotropic) {
    BallPrior prior(3, 1.0, 5);
    Vec mean(3, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const Vec z = prior.sample_one();
        for (int j = 0; j < 3; ++j) mean[j] += z[j] / n;
    }
    for (double m : mean) EXPECT_NEAR(m, 0.0, 0.01);
}

TEST(BallPrior, DeterministicUnderSeedAndSplit) {
    BallPrior a(2, 1.0, 10), b(2, 1.0, 10);
    EXPECT_EQ(a.sample(20), b.sample(20));
    BallPrior ca = a.split(), cb = b.split();
    EXPECT_EQ(ca.sample(5), cb.sample(5));
    EXPECT_NE(ca.sample(5), a.sample(5));
}

TEST(BallPrior, InvalidArgumentsThrow) {
    EXPECT_THROW(BallPrior(0, 1.0, 0), ContractError);
    EXPECT_THROW(BallPrior(2, 0.0, 0), ContractError);
    EXPECT_THROW(BallPrior(2, -1.0, 0), ContractError);
    EXPECT_THROW(BallPrior::for_action_dim(0, 0), ContractError);
    BallPrior p(2, 1.0, 0);
    EXPECT_THROW(p.sample(0), ContractError);
}
