#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drol/error.hpp"
#include "drol/rng.hpp"

namespace drol {

using Vec = std::vector<double>;

enum class Activation : std::uint8_t {
    Gelu = 0,
    Relu = 1,
};

inline double activate(Activation act, double x) {
    switch (act) {
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Gelu: break;
    }
    return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

inline double activate_derivative(Activation act, double x) {
    switch (act) {
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Gelu: break;
    }
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    return cdf + x * pdf;
}

/// One affine layer. Weights are row-major by output unit: weight[o * in + i].
struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    Vec weight;
    Vec bias;
    Vec weight_grad;
    Vec bias_grad;

    Dense() = default;
    Dense(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0),
          weight_grad(in_dim * out_dim, 0.0), bias_grad(out_dim, 0.0) {}

    double& w(std::size_t o, std::size_t i) { return weight[o * in + i]; }
    double w(std::size_t o, std::size_t i) const { return weight[o * in + i]; }
};

/// Activations recorded by a forward pass; consumed by backward.
struct ForwardCache {
    std::vector<Vec> inputs; // input seen by each layer
    std::vector<Vec> pre;    // pre-activation of each layer

    bool empty() const { return inputs.empty(); }
    void clear() {
        inputs.clear();
        pre.clear();
    }
};

/**
 * Feed-forward network: hidden layers use one activation, the output layer is linear.
 *
 * Holds parameters and gradient buffers of identical shape. Gradients
 * accumulate across backward calls until zero_grad (or adam_step) clears them.
 */
class Mlp {
public:
    Mlp() = default;

    /// Build with He-style uniform init: weights in +-sqrt(6 / fan_in), zero biases.
    Mlp(std::span<const std::size_t> sizes, Rng& rng, Activation hidden = Activation::Gelu)
        : Mlp(zeros(sizes, hidden)) {
        for (auto& layer : layers_) {
            const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
            for (auto& w : layer.weight) w = rng.uniform(-bound, bound);
        }
    }

    Mlp(std::initializer_list<std::size_t> sizes, Rng& rng, Activation hidden = Activation::Gelu)
        : Mlp(std::span<const std::size_t>(sizes.begin(), sizes.size()), rng, hidden) {}

    static Mlp zeros(std::span<const std::size_t> sizes, Activation hidden = Activation::Gelu) {
        require(sizes.size() >= 2, "Mlp needs at least input and output sizes");
        Mlp net;
        net.hidden_ = hidden;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            require(sizes[l] > 0 && sizes[l + 1] > 0, "Mlp layer sizes must be positive");
            net.layers_.emplace_back(sizes[l], sizes[l + 1]);
        }
        return net;
    }

    static Mlp zeros(std::initializer_list<std::size_t> sizes, Activation hidden = Activation::Gelu) {
        return zeros(std::span<const std::size_t>(sizes.begin(), sizes.size()), hidden);
    }

    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
    std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
    std::size_t num_layers() const { return layers_.size(); }
    Activation hidden_activation() const { return hidden_; }

    const std::vector<Dense>& layers() const { return layers_; }
    std::vector<Dense>& layers() { return layers_; }

    Vec forward(std::span<const double> x) const {
        check_input(x);
        Vec cur(x.begin(), x.end());
        Vec next;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            affine(layers_[l], cur, next);
            if (l + 1 < layers_.size())
                for (auto& v : next) v = activate(hidden_, v);
            cur.swap(next);
        }
        return cur;
    }

    Vec forward(std::span<const double> x, ForwardCache& cache) const {
        check_input(x);
        cache.inputs.resize(layers_.size());
        cache.pre.resize(layers_.size());
        Vec cur(x.begin(), x.end());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            cache.inputs[l] = cur;
            affine(layers_[l], cur, cache.pre[l]);
            cur = cache.pre[l];
            if (l + 1 < layers_.size())
                for (auto& v : cur) v = activate(hidden_, v);
        }
        return cur;
    }

    /// Accumulate d(out_grad . y)/dparams into the gradient buffers; returns d(out_grad . y)/dx.
    Vec backward(const ForwardCache& cache, std::span<const double> out_grad) {
        return propagate(cache, out_grad, &layers_);
    }

    /// Input gradient only; parameter gradients are left untouched.
    Vec input_gradient(const ForwardCache& cache, std::span<const double> out_grad) const {
        return propagate(cache, out_grad, nullptr);
    }

    void zero_grad() {
        for (auto& layer : layers_) {
            std::fill(layer.weight_grad.begin(), layer.weight_grad.end(), 0.0);
            std::fill(layer.bias_grad.begin(), layer.bias_grad.end(), 0.0);
        }
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
        return n;
    }

    /// Parameter blocks in a fixed order: w0, b0, w1, b1, ...
    std::vector<std::span<double>> parameter_blocks() {
        std::vector<std::span<double>> out;
        for (auto& layer : layers_) {
            out.emplace_back(layer.weight);
            out.emplace_back(layer.bias);
        }
        return out;
    }

    std::vector<std::span<const double>> parameter_blocks() const {
        std::vector<std::span<const double>> out;
        for (const auto& layer : layers_) {
            out.emplace_back(layer.weight);
            out.emplace_back(layer.bias);
        }
        return out;
    }

    std::vector<std::span<double>> gradient_blocks() {
        std::vector<std::span<double>> out;
        for (auto& layer : layers_) {
            out.emplace_back(layer.weight_grad);
            out.emplace_back(layer.bias_grad);
        }
        return out;
    }

    bool same_shape(const Mlp& other) const {
        if (layers_.size() != other.layers_.size()) return false;
        for (std::size_t l = 0; l < layers_.size(); ++l)
            if (layers_[l].in != other.layers_[l].in || layers_[l].out != other.layers_[l].out) return false;
        return true;
    }

    bool all_finite() const {
        for (const auto& layer : layers_) {
            for (double v : layer.weight)
                if (!std::isfinite(v)) return false;
            for (double v : layer.bias)
                if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const Mlp& a, const Mlp& b) {
        if (!a.same_shape(b) || a.hidden_ != b.hidden_) return false;
        for (std::size_t l = 0; l < a.layers_.size(); ++l)
            if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias) return false;
        return true;
    }

private:
    void check_input(std::span<const double> x) const {
        require(!layers_.empty(), "forward on an empty Mlp");
        if (x.size() != layers_.front().in)
            throw ContractError("Mlp input has " + std::to_string(x.size()) + " entries, expected " +
                                std::to_string(layers_.front().in));
    }

    static void affine(const Dense& layer, std::span<const double> x, Vec& y) {
        y.assign(layer.out, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* row = layer.weight.data() + o * layer.in;
            double sum = layer.bias[o];
            for (std::size_t i = 0; i < layer.in; ++i) sum += row[i] * x[i];
            y[o] = sum;
        }
    }

    Vec propagate(const ForwardCache& cache, std::span<const double> out_grad, std::vector<Dense>* sink) const {
        if (cache.inputs.size() != layers_.size() || cache.pre.size() != layers_.size())
            throw ContractError("backward called without a matching forward cache");
        require(out_grad.size() == output_dim(), "output gradient has wrong length");
        Vec delta(out_grad.begin(), out_grad.end());
        Vec below;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            const Dense& layer = layers_[l];
            const Vec& input = cache.inputs[l];
            require(input.size() == layer.in && cache.pre[l].size() == layer.out, "forward cache shape mismatch");
            if (l + 1 < layers_.size())
                for (std::size_t o = 0; o < layer.out; ++o) delta[o] *= activate_derivative(hidden_, cache.pre[l][o]);
            below.assign(layer.in, 0.0);
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[o];
                const double* row = layer.weight.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) below[i] += row[i] * d;
                if (sink) {
                    Dense& acc = (*sink)[l];
                    double* grow = acc.weight_grad.data() + o * layer.in;
                    for (std::size_t i = 0; i < layer.in; ++i) grow[i] += d * input[i];
                    acc.bias_grad[o] += d;
                }
            }
            delta.swap(below);
        }
        return delta;
    }

    std::vector<Dense> layers_;
    Activation hidden_ = Activation::Gelu;
};

/// Adaptive-moment optimizer state. Moment buffers mirror Mlp::parameter_blocks().
struct AdamState {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Vec> first;
    std::vector<Vec> second;

    AdamState() = default;
    explicit AdamState(double learning_rate) : lr(learning_rate) {}
};

/// Apply one bias-corrected Adam update and clear the gradient buffers.
inline void adam_step(Mlp& net, AdamState& state) {
    auto params = net.parameter_blocks();
    auto grads = net.gradient_blocks();
    if (state.first.empty()) {
        for (const auto& block : params) {
            state.first.emplace_back(block.size(), 0.0);
            state.second.emplace_back(block.size(), 0.0);
        }
    }
    require(state.first.size() == params.size() && state.second.size() == params.size(),
            "Adam moments do not match the network");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        require(state.first[b].size() == params[b].size(), "Adam moments do not match the network");
        for (std::size_t j = 0; j < params[b].size(); ++j) {
            const double g = grads[b][j];
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in adam_step");
            double& m = state.first[b][j];
            double& v = state.second[b][j];
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            params[b][j] -= state.lr * (m / c1) / (std::sqrt(v / c2) + state.eps);
        }
    }
    net.zero_grad();
    if (!net.all_finite()) throw NumericError("non-finite parameter after adam_step");
}

/// target <- (1 - tau) * target + tau * online, elementwise. Written as an
/// increment so equal nets stay bitwise equal.
inline void polyak_update(Mlp& target, const Mlp& online, double tau) {
    require(target.same_shape(online), "polyak_update shape mismatch");
    require(tau >= 0.0 && tau <= 1.0, "polyak rate must lie in [0, 1]");
    auto dst = target.parameter_blocks();
    auto src = online.parameter_blocks();
    for (std::size_t b = 0; b < dst.size(); ++b)
        for (std::size_t j = 0; j < dst[b].size(); ++j) dst[b][j] += tau * (src[b][j] - dst[b][j]);
}

// Checkpoint format (little-endian):
//   "DROLNET1" | u32 count | per net: u32 name_len, name bytes, u8 activation, u32 layers,
//   per layer: u32 in, u32 out, f64[out*in] weight, f64[out] bias
namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b.data(), 4);
}

inline void put_f64(std::ostream& os, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b.data(), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw ContractError("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) {
    std::array<unsigned char, 8> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw ContractError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

constexpr char kCheckpointMagic[8] = {'D', 'R', 'O', 'L', 'N', 'E', 'T', '1'};

} // namespace detail

struct NamedNet {
    std::string name;
    Mlp net;
};

inline void save_checkpoint(std::ostream& os, std::span<const NamedNet> nets) {
    os.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
    detail::put_u32(os, static_cast<std::uint32_t>(nets.size()));
    for (const auto& [name, net] : nets) {
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        const char act = static_cast<char>(net.hidden_activation());
        os.write(&act, 1);
        detail::put_u32(os, static_cast<std::uint32_t>(net.num_layers()));
        for (const auto& layer : net.layers()) {
            detail::put_u32(os, static_cast<std::uint32_t>(layer.in));
            detail::put_u32(os, static_cast<std::uint32_t>(layer.out));
            for (double w : layer.weight) detail::put_f64(os, w);
            for (double b : layer.bias) detail::put_f64(os, b);
        }
    }
    if (!os) throw ContractError("failed writing checkpoint");
}

inline std::vector<NamedNet> load_checkpoint(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
        throw ContractError("not a drol checkpoint");
    const std::uint32_t count = detail::get_u32(is);
    std::vector<NamedNet> nets;
    for (std::uint32_t n = 0; n < count; ++n) {
        NamedNet entry;
        entry.name.resize(detail::get_u32(is));
        if (!is.read(entry.name.data(), static_cast<std::streamsize>(entry.name.size())))
            throw ContractError("truncated checkpoint");
        char act = 0;
        if (!is.read(&act, 1)) throw ContractError("truncated checkpoint");
        require(act == 0 || act == 1, "unknown activation tag in checkpoint");
        const std::uint32_t num_layers = detail::get_u32(is);
        require(num_layers >= 1, "checkpoint net has no layers");
        std::vector<std::size_t> sizes;
        std::vector<std::pair<Vec, Vec>> values;
        for (std::uint32_t l = 0; l < num_layers; ++l) {
            const std::uint32_t in = detail::get_u32(is);
            const std::uint32_t out = detail::get_u32(is);
            if (l == 0) sizes.push_back(in);
            else require(sizes.back() == in, "checkpoint layer dimensions do not chain");
            sizes.push_back(out);
            Vec w(static_cast<std::size_t>(in) * out), b(out);
            for (auto& x : w) x = detail::get_f64(is);
            for (auto& x : b) x = detail::get_f64(is);
            values.emplace_back(std::move(w), std::move(b));
        }
        entry.net = Mlp::zeros(sizes, static_cast<Activation>(act));
        for (std::size_t l = 0; l < values.size(); ++l) {
            entry.net.layers()[l].weight = std::move(values[l].first);
            entry.net.layers()[l].bias = std::move(values[l].second);
        }
        nets.push_back(std::move(entry));
    }
    return nets;
}

} // namespace drol
