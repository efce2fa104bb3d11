#pragma once

// Dense layers, Glorot-uniform initialization, and the two optimizers used in
// training: RMSProp (generator side) and Adam (critic).

#include <did/rng.hpp>
#include <did/tensor.hpp>

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace did {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Activation { identity, leaky_relu, tanh };

struct DenseLayer {
  std::size_t in = 0, out = 0;
  std::vector<double> W;  // out x in, row-major
  std::vector<double> b;  // out
  Activation act = Activation::identity;
  double alpha = 0.2;  // leaky_relu slope
};

// Handles to one layer's parameters staged as leaves on a tape.
struct StagedLayer {
  Tensor W, b;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const { return layers.front().in; }
  std::size_t out_dim() const { return layers.back().out; }

  std::vector<StagedLayer> stage(Tape& tape) const {
    std::vector<StagedLayer> staged;
    staged.reserve(layers.size());
    for (const auto& l : layers)
      staged.push_back({tape.leaf({l.out, l.in}, l.W), tape.leaf({l.out}, l.b)});
    return staged;
  }

  // x: [batch, in] on the same tape as `staged`
  Tensor forward(Tape& tape, const std::vector<StagedLayer>& staged, Tensor x) const {
    const std::size_t batch = x.shape()[0];
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = tape.add(tape.matmul_nt(x, staged[i].W), tape.bcast_cols(staged[i].b, batch));
      switch (layers[i].act) {
        case Activation::identity: break;
        case Activation::leaky_relu: x = tape.leaky_relu(x, layers[i].alpha); break;
        case Activation::tanh: x = tape.tanh(x); break;
      }
    }
    return x;
  }

  // Tape-free forward for evaluation paths (encoding a whole dataset etc.).
  // x: [batch, in] row-major; returns [batch, out].
  std::vector<double> forward_raw(const std::vector<double>& x, std::size_t batch) const {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMat h = Eigen::Map<const RowMat>(x.data(), batch, layers.front().in);
    for (const auto& l : layers) {
      Eigen::Map<const RowMat> W(l.W.data(), l.out, l.in);
      Eigen::Map<const Eigen::VectorXd> bias(l.b.data(), l.out);
      RowMat z = (h * W.transpose()).rowwise() + bias.transpose();
      switch (l.act) {
        case Activation::identity: break;
        case Activation::leaky_relu:
          z = z.unaryExpr([a = l.alpha](double v) { return v > 0.0 ? v : a * v; });
          break;
        case Activation::tanh:
          z = z.array().tanh();
          break;
      }
      h = std::move(z);
    }
    return {h.data(), h.data() + h.size()};
  }

  std::vector<std::vector<double>*> params() {
    std::vector<std::vector<double>*> p;
    for (auto& l : layers) {
      p.push_back(&l.W);
      p.push_back(&l.b);
    }
    return p;
  }
};

// Glorot-uniform weights, zero biases; deterministic under seed.
inline Mlp init_mlp(const std::vector<std::size_t>& sizes, const std::vector<Activation>& acts,
                    std::uint64_t seed, double alpha = 0.2) {
  if (sizes.size() < 2) throw std::invalid_argument("init_mlp: need at least one layer");
  if (acts.size() != sizes.size() - 1)
    throw std::invalid_argument("init_mlp: one activation per layer required");
  for (auto s : sizes)
    if (s == 0) throw std::invalid_argument("init_mlp: layer sizes must be positive");
  std::mt19937_64 rng(splitmix64(seed));
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer l;
    l.in = sizes[i];
    l.out = sizes[i + 1];
    l.act = acts[i];
    l.alpha = alpha;
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    l.W.resize(l.out * l.in);
    for (auto& w : l.W) w = uniform(rng, -bound, bound);
    l.b.assign(l.out, 0.0);
    mlp.layers.push_back(std::move(l));
  }
  return mlp;
}

namespace detail {
inline void require_finite_grads(const std::vector<std::vector<double>>& grads, const char* who) {
  for (const auto& g : grads)
    for (double v : g)
      if (!std::isfinite(v))
        throw NumericError(std::string(who) + ": non-finite gradient, aborting step");
}
}  // namespace detail

// v <- rho v + (1-rho) g^2 ; theta <- theta - lr g / (sqrt(v) + eps)
struct RmsProp {
  double lr = 1e-4;
  double rho = 0.9;
  double eps = 1e-8;
  std::vector<std::vector<double>> v;

  void step(const std::vector<std::vector<double>*>& params,
            const std::vector<std::vector<double>>& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("rmsprop: param/grad count mismatch");
    detail::require_finite_grads(grads, "rmsprop");
    if (v.empty()) {
      v.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) v[i].assign(params[i]->size(), 0.0);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      const auto& g = grads[i];
      if (p.size() != g.size()) throw std::invalid_argument("rmsprop: grad shape mismatch");
      for (std::size_t j = 0; j < p.size(); ++j) {
        v[i][j] = rho * v[i][j] + (1.0 - rho) * g[j] * g[j];
        p[j] -= lr * g[j] / (std::sqrt(v[i][j]) + eps);
      }
    }
  }
};

// bias-corrected Adam
struct Adam {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m, v;

  void step(const std::vector<std::vector<double>*>& params,
            const std::vector<std::vector<double>>& grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam: param/grad count mismatch");
    detail::require_finite_grads(grads, "adam");
    if (m.empty()) {
      m.resize(params.size());
      v.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i].assign(params[i]->size(), 0.0);
        v[i].assign(params[i]->size(), 0.0);
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      const auto& g = grads[i];
      if (p.size() != g.size()) throw std::invalid_argument("adam: grad shape mismatch");
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g[j];
        v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j];
        p[j] -= lr * (m[i][j] / c1) / (std::sqrt(v[i][j] / c2) + eps);
      }
    }
  }
};

}  // namespace did
