#pragma once

// Bounded uniform prior over the latent space and the single-axis
// perturbation procedure that builds contrastive sample pairs.

#include <did/models.hpp>
#include <did/rng.hpp>
#include <did/tensor.hpp>

#include <stdexcept>
#include <vector>

namespace did {

// [batch, n] flat row-major, i.i.d. U[-1,1]
inline std::vector<double> sample_prior(std::size_t n, std::size_t batch, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("sample_prior: latent dim must be >= 1");
  std::vector<double> c(batch * n);
  for (auto& v : c) v = uniform(rng, -1.0, 1.0);
  return c;
}

struct PerturbationPlan {
  std::vector<double> base;               // c, length n
  std::vector<std::size_t> axes;          // k distinct dims
  double delta = 0.0;                     // shared step magnitude
  std::vector<std::vector<double>> perturbed;  // k codes, each differs from base at one axis
};

// Perturb `base` along k distinct axes by a shared step of exact length delta,
// stepping negative where the positive step would leave [-1,1].
inline PerturbationPlan make_plan(const std::vector<double>& base, std::size_t k, double delta_min,
                                  double delta_max, std::mt19937_64& rng) {
  const std::size_t n = base.size();
  if (k < 2 || k > n) throw std::invalid_argument("make_plan: need 2 <= k <= n");
  if (delta_max > 2.0) throw std::invalid_argument("make_plan: delta_max > 2 cannot stay in bounds");
  PerturbationPlan plan;
  plan.base = base;
  plan.delta = uniform(rng, delta_min, delta_max);
  // partial Fisher-Yates: k distinct axes, uniform over subsets
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + uniform_index(rng, n - i);
    std::swap(idx[i], idx[j]);
    plan.axes.push_back(idx[i]);
  }
  for (std::size_t i = 0; i < k; ++i) {
    auto code = base;
    const std::size_t a = plan.axes[i];
    const double stepped = code[a] + plan.delta > 1.0 ? code[a] - plan.delta : code[a] + plan.delta;
    if (stepped < -1.0 || stepped > 1.0)
      throw std::invalid_argument("make_plan: step of length " + std::to_string(plan.delta) +
                                  " cannot stay in [-1,1] from " + std::to_string(code[a]));
    code[a] = stepped;
    plan.perturbed.push_back(std::move(code));
  }
  return plan;
}

// Builds the H input rows [x, x_i'] where x = G(base) is shared across pairs.
// Returns a [k, 2*pixels] tensor on the tape, with gradients flowing into G.
inline Tensor make_pairs(const Mlp& G, Tape& tape, const std::vector<StagedLayer>& staged,
                         const PerturbationPlan& plan) {
  const std::size_t n = plan.base.size();
  const std::size_t k = plan.perturbed.size();
  std::vector<double> codes((k + 1) * n);
  std::copy(plan.base.begin(), plan.base.end(), codes.begin());
  for (std::size_t i = 0; i < k; ++i)
    std::copy(plan.perturbed[i].begin(), plan.perturbed[i].end(), codes.begin() + (i + 1) * n);
  Tensor imgs = generate(G, tape, staged, tape.leaf({k + 1, n}, std::move(codes)));
  Tensor x = tape.slice_rows(imgs, 0, 1);
  // replicate the shared first element across the k pair rows
  Tensor ones = tape.leaf({k, 1}, std::vector<double>(k, 1.0));
  Tensor x_rep = tape.matmul(ones, x);
  return tape.concat_cols(x_rep, tape.slice_rows(imgs, 1, k));
}

// Sweeps one axis linearly over [-1,1]; other coordinates stay fixed.
inline std::vector<std::vector<double>> traversal_codes(const std::vector<double>& base,
                                                        std::size_t axis, std::size_t steps) {
  if (axis >= base.size()) throw std::invalid_argument("traversal_codes: axis out of range");
  if (steps < 2) throw std::invalid_argument("traversal_codes: need at least 2 steps");
  std::vector<std::vector<double>> codes;
  for (std::size_t s = 0; s < steps; ++s) {
    auto c = base;
    c[axis] = -1.0 + 2.0 * static_cast<double>(s) / static_cast<double>(steps - 1);
    codes.push_back(std::move(c));
  }
  return codes;
}

}  // namespace did
