#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsa/random.hpp"

namespace dsa {

/// Weights and biases of a fully connected ReLU network. Layer l maps
/// fan_in(l) -> fan_out(l) with `weights[l]` shaped fan_out x fan_in.
/// Also used as the container for gradients and optimizer moments.
struct NetworkParams {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    std::size_t layer_count() const { return weights.size(); }
    Eigen::Index input_dim() const { return weights.front().cols(); }
    Eigen::Index output_dim() const { return weights.back().rows(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
        return n;
    }

    bool all_finite() const {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
        }
        return true;
    }

    NetworkParams zeros_like() const {
        NetworkParams z;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            z.weights.push_back(Eigen::MatrixXd::Zero(weights[l].rows(), weights[l].cols()));
            z.biases.push_back(Eigen::VectorXd::Zero(biases[l].size()));
        }
        return z;
    }

    bool operator==(const NetworkParams& o) const {
        if (weights.size() != o.weights.size()) return false;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (weights[l].rows() != o.weights[l].rows() || weights[l].cols() != o.weights[l].cols() ||
                biases[l].size() != o.biases[l].size()) {
                return false;
            }
            if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
        }
        return true;
    }
};

/// Random network with `hidden_layers` ReLU layers of width `hidden_dim`.
/// Weights ~ N(0, 1/fan_in), biases zero.
inline NetworkParams init_network(int input_dim, int hidden_dim, int output_dim, Rng& rng, int hidden_layers = 3) {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1 || hidden_layers < 0) {
        throw std::invalid_argument("init_network: dimensions must be positive");
    }
    std::vector<int> dims{input_dim};
    for (int h = 0; h < hidden_layers; ++h) dims.push_back(hidden_dim);
    dims.push_back(output_dim);

    NetworkParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) w(r, c) = scale * rng.normal();
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return p;
}

/// Batched forward pass; `inputs` holds one sample per column.
inline Eigen::MatrixXd forward_batch(const NetworkParams& p, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != p.input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
    Eigen::MatrixXd h = inputs;
    const std::size_t last = p.layer_count() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
        Eigen::MatrixXd z = p.weights[l] * h;
        z.colwise() += p.biases[l];
        h = l == last ? std::move(z) : Eigen::MatrixXd(z.cwiseMax(0.0));
    }
    return h;
}

inline Eigen::VectorXd forward(const NetworkParams& p, std::span<const double> input) {
    if (static_cast<Eigen::Index>(input.size()) != p.input_dim()) {
        throw std::invalid_argument("forward: input dimension mismatch");
    }
    const Eigen::Map<const Eigen::MatrixXd> x(input.data(), static_cast<Eigen::Index>(input.size()), 1);
    return forward_batch(p, x).col(0);
}

inline Eigen::VectorXd forward(const NetworkParams& p, const Eigen::VectorXd& input) {
    return forward(p, std::span<const double>(input.data(), static_cast<std::size_t>(input.size())));
}

struct LossAndGradients {
    double loss = 0.0;
    NetworkParams grads;
};

/// Mean squared error between `targets[j]` and the network output for
/// `actions[j]` on sample j; other outputs carry no loss.
inline LossAndGradients loss_and_gradients(const NetworkParams& p, const Eigen::MatrixXd& inputs,
                                           std::span<const int> actions, std::span<const double> targets) {
    const Eigen::Index batch = inputs.cols();
    if (batch == 0) throw std::invalid_argument("loss_and_gradients: empty batch");
    if (inputs.rows() != p.input_dim()) throw std::invalid_argument("loss_and_gradients: input dimension mismatch");
    if (static_cast<Eigen::Index>(actions.size()) != batch || static_cast<Eigen::Index>(targets.size()) != batch) {
        throw std::invalid_argument("loss_and_gradients: batch size mismatch");
    }

    const std::size_t layers = p.layer_count();
    std::vector<Eigen::MatrixXd> act(layers + 1);  // act[0] = input, act[l+1] = output of layer l
    std::vector<Eigen::MatrixXd> pre(layers);
    act[0] = inputs;
    for (std::size_t l = 0; l < layers; ++l) {
        pre[l] = p.weights[l] * act[l];
        pre[l].colwise() += p.biases[l];
        act[l + 1] = l + 1 == layers ? pre[l] : Eigen::MatrixXd(pre[l].cwiseMax(0.0));
    }

    LossAndGradients out;
    const Eigen::MatrixXd& q = act[layers];
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), batch);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
        const double y = targets[static_cast<std::size_t>(j)];
        const int a = actions[static_cast<std::size_t>(j)];
        if (!std::isfinite(y)) throw std::domain_error("loss_and_gradients: non-finite target");
        if (a < 0 || a >= q.rows()) throw std::invalid_argument("loss_and_gradients: action out of range");
        const double err = q(a, j) - y;
        out.loss += err * err * inv_batch;
        delta(a, j) = 2.0 * err * inv_batch;
    }

    out.grads.weights.resize(layers);
    out.grads.biases.resize(layers);
    for (std::size_t l = layers; l-- > 0;) {
        out.grads.weights[l] = delta * act[l].transpose();
        out.grads.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = p.weights[l].transpose() * delta;
            delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return out;
}

/// Adam moments and step count.
struct AdamState {
    NetworkParams first;
    NetworkParams second;
    std::int64_t step = 0;

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    static AdamState for_params(const NetworkParams& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& opt, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
    if (!grads.all_finite()) throw std::domain_error("adam_step: non-finite gradient");
    ++opt.step;
    const double t = static_cast<double>(opt.step);
    const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
    const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = AdamState::kBeta1 * m + (1.0 - AdamState::kBeta1) * g;
        v = AdamState::kBeta2 * v + (1.0 - AdamState::kBeta2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + AdamState::kEpsilon);
    };
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        update(params.weights[l], grads.weights[l], opt.first.weights[l], opt.second.weights[l]);
        update(params.biases[l], grads.biases[l], opt.first.biases[l], opt.second.biases[l]);
    }
}

// Checkpoint layout (little-endian): 8-byte magic, u32 version, u32 layer
// count, then per layer u32 rows, u32 cols, rows*cols f64 weights in row-major
// order and rows f64 biases.
namespace detail {

inline constexpr char kCheckpointMagic[8] = {'D', 'S', 'A', 'Q', 'N', 'E', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& out, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, sizeof v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double d;
    std::memcpy(&d, &v, sizeof d);
    return d;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const NetworkParams& p) {
    out.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
    detail::put_u32(out, detail::kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(p.layer_count()));
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
        const auto& w = p.weights[l];
        detail::put_u32(out, static_cast<std::uint32_t>(w.rows()));
        detail::put_u32(out, static_cast<std::uint32_t>(w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) detail::put_f64(out, w(r, c));
        }
        for (Eigen::Index r = 0; r < w.rows(); ++r) detail::put_f64(out, p.biases[l](r));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

inline NetworkParams load_checkpoint(std::istream& in) {
    char magic[sizeof detail::kCheckpointMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0) {
        throw std::runtime_error("checkpoint: bad magic");
    }
    if (const auto version = detail::get_u32(in); version != detail::kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto layers = detail::get_u32(in);
    if (layers == 0 || layers > 1024) throw std::runtime_error("checkpoint: bad layer count");
    NetworkParams p;
    for (std::uint32_t l = 0; l < layers; ++l) {
        const auto rows = detail::get_u32(in);
        const auto cols = detail::get_u32(in);
        if (l > 0 && cols != p.weights.back().rows()) throw std::runtime_error("checkpoint: layer dimensions do not chain");
        Eigen::MatrixXd w(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) w(r, c) = detail::get_f64(in);
        }
        Eigen::VectorXd b(rows);
        for (std::uint32_t r = 0; r < rows; ++r) b(r) = detail::get_f64(in);
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

}  // namespace dsa
