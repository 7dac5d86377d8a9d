#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "drol/error.hpp"
#include "drol/nn.hpp"
#include "drol/rng.hpp"

// Closed-form and brute-force reference values for the routed quantization
// toy model, the fixed-tether bias, and candidate-set coverage.

namespace drol::theory {

/// Mixture (1/M) sum_m Unif([c_m - r, c_m + r]) on the real line.
struct QuantizerConfig {
    Vec centers;
    double radius = 0.1;
    std::size_t nodes_per_interval = 10000;

    static QuantizerConfig evenly_spaced(std::size_t modes, double radius, double gap) {
        require(modes >= 1, "need at least one interval");
        QuantizerConfig c;
        c.radius = radius;
        const double mid = 0.5 * static_cast<double>(modes - 1);
        for (std::size_t m = 0; m < modes; ++m) c.centers.push_back((static_cast<double>(m) - mid) * gap);
        c.validate();
        return c;
    }

    void validate() const {
        require(!centers.empty(), "quantizer config needs at least one interval");
        require(radius > 0.0, "interval radius must be positive");
        require(nodes_per_interval >= 1, "quadrature needs at least one node per interval");
        for (std::size_t m = 1; m < centers.size(); ++m)
            if (!(centers[m] - centers[m - 1] > 4.0 * radius))
                throw ContractError("interval centers must be increasing with gaps larger than 4r");
    }
};

/// Minimum distortion of one interval served by q prototypes: r^2 / (3 q^2).
inline double interval_distortion(double radius, std::size_t q) {
    require(q >= 1, "interval distortion needs at least one prototype");
    const double qd = static_cast<double>(q);
    return radius * radius / (3.0 * qd * qd);
}

namespace detail {

inline double midpoint_distortion(std::span<const double> prototypes, const QuantizerConfig& config,
                                  std::size_t nodes) {
    const double r = config.radius;
    const double h = 2.0 * r / static_cast<double>(nodes);
    double total = 0.0;
    for (double c : config.centers) {
        double interval_sum = 0.0;
        for (std::size_t j = 0; j < nodes; ++j) {
            const double a = c - r + (static_cast<double>(j) + 0.5) * h;
            double best = std::numeric_limits<double>::infinity();
            for (double p : prototypes) best = std::min(best, (p - a) * (p - a));
            interval_sum += best;
        }
        total += interval_sum / static_cast<double>(nodes);
    }
    return total / static_cast<double>(config.centers.size());
}

} // namespace detail

/**
 * J(prototypes) = integral of min_k |p_k - a|^2 under the interval mixture.
 *
 * Composite midpoint rule with config.nodes_per_interval nodes per interval,
 * doubled until two successive resolutions agree to 1e-9 relative.
 */
inline double routed_distortion(std::span<const double> prototypes, const QuantizerConfig& config) {
    require(!prototypes.empty(), "routed_distortion needs at least one prototype");
    config.validate();
    std::size_t nodes = config.nodes_per_interval;
    double coarse = detail::midpoint_distortion(prototypes, config, nodes);
    for (int refinement = 0; refinement < 6; ++refinement) {
        nodes *= 2;
        const double fine = detail::midpoint_distortion(prototypes, config, nodes);
        if (std::abs(fine - coarse) <= 1e-9 * std::max(std::abs(fine), 1e-300)) return fine;
        coarse = fine;
    }
    return coarse;
}

struct QuantizerOptimum {
    std::vector<std::size_t> allocation; // prototypes per interval
    Vec prototypes;                      // sorted
    double distortion = 0.0;
};

/**
 * Global optimum over allocations of K prototypes to the M intervals.
 *
 * Intervals with q >= 1 prototypes cost D_q / M exactly (equal cells,
 * midpoint prototypes). An interval left empty is charged the lower bound
 * 4 r^2 / (3 M); every such allocation must lose to the best fully covered one
 * or the oracle refuses to answer.
 */
inline QuantizerOptimum optimal_quantizer_bruteforce(const QuantizerConfig& config, std::size_t k,
                                                     std::size_t max_allocations = 1'000'000) {
    config.validate();
    const std::size_t m = config.centers.size();
    require(k >= m, "allocation oracle needs K >= M (fewer prototypes leave intervals without an exact cost)");

    // C(k + m - 1, m - 1) allocations.
    double count = 1.0;
    for (std::size_t i = 1; i < m; ++i) count = count * static_cast<double>(k + i) / static_cast<double>(i);
    if (count > static_cast<double>(max_allocations))
        throw ContractError("combinatorial budget exceeded: " + std::to_string(count) + " allocations");

    const double r = config.radius;
    const double md = static_cast<double>(m);
    QuantizerOptimum best;
    best.distortion = std::numeric_limits<double>::infinity();
    double best_empty_bound = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> alloc(m, 0);
    auto visit = [&](auto&& self, std::size_t idx, std::size_t remaining) -> void {
        if (idx + 1 == m) {
            alloc[idx] = remaining;
            double cost = 0.0;
            bool has_empty = false;
            for (std::size_t q : alloc) {
                if (q == 0) {
                    has_empty = true;
                    cost += 4.0 * r * r / 3.0 / md;
                } else {
                    cost += interval_distortion(r, q) / md;
                }
            }
            if (has_empty) best_empty_bound = std::min(best_empty_bound, cost);
            else if (cost < best.distortion) {
                best.distortion = cost;
                best.allocation = alloc;
            }
            return;
        }
        for (std::size_t q = 0; q <= remaining; ++q) {
            alloc[idx] = q;
            self(self, idx + 1, remaining - q);
        }
    };
    visit(visit, 0, k);

    if (!(best.distortion < best_empty_bound))
        throw ContractError("allocation oracle cannot certify the optimum against empty-interval allocations");

    for (std::size_t i = 0; i < m; ++i) {
        const double q = static_cast<double>(best.allocation[i]);
        const double cell = 2.0 * r / q;
        for (std::size_t j = 0; j < best.allocation[i]; ++j)
            best.prototypes.push_back(config.centers[i] - r + (static_cast<double>(j) + 0.5) * cell);
    }
    return best;
}

/// Exact minimizer of ||x - a||^2 + alpha * (m / 2) * ||x - x_q||^2:  (2a + alpha m x_q) / (2 + alpha m).
inline Vec fixed_tether_minimizer(std::span<const double> a, std::span<const double> x_q, double alpha, double m) {
    require(m > 0.0, "curvature m must be positive");
    require(alpha >= 0.0, "alpha must be non-negative");
    require(a.size() == x_q.size(), "target and critic maximizer dimensions differ");
    Vec out(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) out[j] = (2.0 * a[j] + alpha * m * x_q[j]) / (2.0 + alpha * m);
    return out;
}

/// The contraction constant 2 / (2 + alpha m) of the tether bias.
inline double tether_bias_ratio(double alpha, double m) { return 2.0 / (2.0 + alpha * m); }

namespace detail {

inline void check_probabilities(std::span<const double> p) {
    require(!p.empty(), "coverage needs at least one neighborhood");
    double sum = 0.0;
    for (double v : p) {
        if (!(v > 0.0 && v <= 1.0)) throw ContractError("coverage probabilities must lie in (0, 1]");
        sum += v;
    }
    // Neighborhoods are disjoint, so one candidate can land in at most one of them.
    if (sum > 1.0 + 1e-12) throw ContractError("coverage probabilities of disjoint neighborhoods sum above 1");
}

} // namespace detail

/// 1 - sum_m (1 - p_m)^K.
inline double coverage_bound(std::span<const double> p, std::size_t k) {
    detail::check_probabilities(p);
    double miss = 0.0;
    for (double v : p) miss += std::pow(1.0 - v, static_cast<double>(k));
    return 1.0 - miss;
}

/// 1 - M exp(-K p_min).
inline double coverage_exponential_bound(std::span<const double> p, std::size_t k) {
    detail::check_probabilities(p);
    double p_min = p[0];
    for (double v : p) p_min = std::min(p_min, v);
    return 1.0 - static_cast<double>(p.size()) * std::exp(-static_cast<double>(k) * p_min);
}

struct CoverageEstimate {
    double frequency = 0.0;
    double std_error = 0.0;
    std::size_t trials = 0;
};

/// Monte Carlo frequency that K independent categorical-or-miss draws hit every neighborhood.
inline CoverageEstimate coverage_montecarlo(std::span<const double> p, std::size_t k, std::size_t trials,
                                            std::uint64_t seed) {
    detail::check_probabilities(p);
    require(trials >= 1, "coverage Monte Carlo needs at least one trial");
    require(p.size() <= 64, "coverage Monte Carlo supports at most 64 neighborhoods");
    Vec cumulative(p.size());
    double acc = 0.0;
    for (std::size_t m = 0; m < p.size(); ++m) cumulative[m] = (acc += p[m]);
    const std::uint64_t all = p.size() == 64 ? ~0ULL : ((1ULL << p.size()) - 1);

    Rng rng(seed);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::uint64_t seen = 0;
        for (std::size_t draw = 0; draw < k; ++draw) {
            const double u = rng.uniform();
            for (std::size_t m = 0; m < cumulative.size(); ++m) {
                if (u < cumulative[m]) {
                    seen |= 1ULL << m;
                    break;
                }
            }
        }
        if (seen == all) ++hits;
    }
    CoverageEstimate out;
    out.trials = trials;
    out.frequency = static_cast<double>(hits) / static_cast<double>(trials);
    out.std_error = std::sqrt(out.frequency * (1.0 - out.frequency) / static_cast<double>(trials));
    return out;
}

} // namespace drol::theory
