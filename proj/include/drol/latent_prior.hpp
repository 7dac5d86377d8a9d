#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "drol/error.hpp"
#include "drol/nn.hpp"
#include "drol/rng.hpp"

namespace drol {

/**
 * Uniform distribution on the Euclidean ball of radius R in d_z dimensions.
 *
 * Samples are drawn as a Gaussian direction scaled by R * U^(1/d_z). Every
 * sample satisfies ||z|| <= R, which is the point of using a ball rather than
 * a Gaussian latent.
 */
class BallPrior {
public:
    BallPrior(std::size_t latent_dim, double radius, std::uint64_t seed)
        : latent_dim_(latent_dim), radius_(radius), rng_(seed) {
        require(latent_dim_ >= 1, "latent dimension must be at least 1");
        require(radius_ > 0.0 && std::isfinite(radius_), "ball radius must be positive");
    }

    /// Default rule: R = sqrt(d_a). latent_dim = 0 means d_z = d_a.
    static BallPrior for_action_dim(std::size_t action_dim, std::uint64_t seed, std::size_t latent_dim = 0) {
        require(action_dim >= 1, "action dimension must be at least 1");
        return BallPrior(latent_dim == 0 ? action_dim : latent_dim, std::sqrt(static_cast<double>(action_dim)), seed);
    }

    std::size_t latent_dim() const { return latent_dim_; }
    double radius() const { return radius_; }
    Rng& rng() { return rng_; }

    /// d_z / (d_z + 2) * R^2.
    double second_moment() const {
        const double d = static_cast<double>(latent_dim_);
        return d / (d + 2.0) * radius_ * radius_;
    }

    Vec sample_one() {
        Vec z(latent_dim_);
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (auto& v : z) {
                v = rng_.normal();
                norm2 += v * v;
            }
        } while (norm2 == 0.0);
        const double scale =
            radius_ * std::pow(rng_.uniform(), 1.0 / static_cast<double>(latent_dim_)) / std::sqrt(norm2);
        for (auto& v : z) v *= scale;
        clamp_to_ball(z);
        return z;
    }

    std::vector<Vec> sample(std::size_t count) {
        require(count >= 1, "sample count must be at least 1");
        std::vector<Vec> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) out.push_back(sample_one());
        return out;
    }

    /// Independent sampler with the same geometry and a derived stream.
    BallPrior split() {
        BallPrior child(*this);
        child.rng_ = rng_.split();
        return child;
    }

private:
    // Rounding in the scale can leave ||z|| a few ulps above R.
    void clamp_to_ball(Vec& z) const {
        for (;;) {
            double norm2 = 0.0;
            for (double v : z) norm2 += v * v;
            if (std::sqrt(norm2) <= radius_) return;
            for (auto& v : z) v *= (1.0 - 0x1.0p-50);
        }
    }

    std::size_t latent_dim_;
    double radius_;
    Rng rng_;
};

} // namespace drol
