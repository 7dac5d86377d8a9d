#pragma once

#include <span>
#include <vector>

#include "drol/nn.hpp"

namespace drol {

/// One offline sample (s, a, r, s', done).
struct Transition {
    Vec state;
    Vec action;
    double reward = 0.0;
    Vec next_state;
    bool done = false;

    friend bool operator==(const Transition&, const Transition&) = default;
};

inline Vec concat(std::span<const double> a, std::span<const double> b) {
    Vec out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

} // namespace drol
