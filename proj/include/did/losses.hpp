#pragma once

// Loss terms: generator adversarial loss, critic loss with gradient penalty,
// contrastive difference loss, and encoder reconstruction loss.

#include <did/models.hpp>
#include <did/rng.hpp>
#include <did/tensor.hpp>

#include <stdexcept>
#include <vector>

namespace did {

struct LossBreakdown {
  double l_g = 0.0;
  double l_d = 0.0;
  double l_h = 0.0;
  double l_enc = 0.0;
  double gp = 0.0;
  double l_total = 0.0;  // l_g + w_h*l_h + w_enc*l_enc as actually optimized
};

// -E[D(G(c))]
inline Tensor generator_adv_loss(Tape& tape, Tensor critic_scores_on_fake) {
  if (critic_scores_on_fake.size() == 0)
    throw std::invalid_argument("generator_adv_loss: empty batch");
  return tape.neg(tape.mean(critic_scores_on_fake));
}

// mean((||d D(x_hat)/d x_hat||_2 - 1)^2) over per-sample interpolates
// x_hat = eps*x + (1-eps)*x_fake, eps ~ U[0,1] shared across a sample's pixels.
// The result is differentiable w.r.t. the critic parameters in `staged_d`.
inline Tensor gradient_penalty(const Mlp& D, Tape& tape, const std::vector<StagedLayer>& staged_d,
                               const std::vector<double>& real, const std::vector<double>& fake,
                               std::size_t batch, std::mt19937_64& rng) {
  if (real.size() != fake.size())
    throw ShapeError("gradient_penalty: real/fake batches differ in size");
  const std::size_t pixels = real.size() / batch;
  std::vector<double> interp(real.size());
  for (std::size_t i = 0; i < batch; ++i) {
    const double eps = uniform01(rng);
    for (std::size_t j = 0; j < pixels; ++j) {
      const std::size_t idx = i * pixels + j;
      interp[idx] = eps * real[idx] + (1.0 - eps) * fake[idx];
    }
  }
  Tensor x_hat = tape.leaf({batch, pixels}, std::move(interp));
  Tensor scores = D.forward(tape, staged_d, x_hat);
  // per-sample input gradients: samples are independent, so the gradient of
  // the batch sum w.r.t. x_hat is row i's own gradient
  Tensor gx = tape.backward(tape.sum(scores), {x_hat}, /*create_graph=*/true)[0];
  Tensor norms = tape.l2_norm_rows(gx);
  return tape.mean(tape.square(tape.offset(norms, -1.0)));
}

// E[D(fake)] - E[D(real)] + lambda * gradient_penalty, the minimization form.
inline Tensor critic_loss(const Mlp& D, Tape& tape, const std::vector<StagedLayer>& staged_d,
                          const std::vector<double>& real, const std::vector<double>& fake,
                          std::size_t batch, double lambda, std::mt19937_64& rng,
                          Tensor* gp_out = nullptr) {
  if (batch == 0) throw std::invalid_argument("critic_loss: empty batch");
  if (lambda < 0.0) throw std::invalid_argument("critic_loss: lambda must be >= 0");
  const std::size_t pixels = real.size() / batch;
  Tensor d_real = D.forward(tape, staged_d, tape.leaf({batch, pixels}, real));
  Tensor d_fake = D.forward(tape, staged_d, tape.leaf({batch, pixels}, fake));
  Tensor adv = tape.sub(tape.mean(d_fake), tape.mean(d_real));
  if (lambda == 0.0) {
    if (gp_out) *gp_out = tape.leaf_scalar(0.0);
    return adv;
  }
  Tensor gp = gradient_penalty(D, tape, staged_d, real, fake, batch, rng);
  if (gp_out) *gp_out = gp;
  return tape.add(adv, tape.scale(gp, lambda));
}

// -mean over unordered pairs of ||v_i - v_j||_2; for k=2 this is -||v_1 - v_2||.
// vs: [k, d_v]
inline Tensor contrastive_difference_loss(Tape& tape, Tensor vs) {
  const std::size_t k = vs.shape()[0];
  if (k < 2) throw std::invalid_argument("contrastive_difference_loss: comparison requires >=2 factors");
  Tensor acc{};
  bool first = true;
  for (std::size_t i = 0; i < k; ++i) {
    Tensor vi = tape.slice_rows(vs, i, 1);
    for (std::size_t j = i + 1; j < k; ++j) {
      Tensor d = tape.l2_norm(tape.sub(vi, tape.slice_rows(vs, j, 1)));
      acc = first ? d : tape.add(acc, d);
      first = false;
    }
  }
  const double pairs = static_cast<double>(k * (k - 1) / 2);
  return tape.scale(acc, -1.0 / pairs);
}

// mean over the batch of ||c - c_enc||_2^2
inline Tensor encoder_recon_loss(Tape& tape, Tensor c, Tensor c_enc) {
  if (c.shape() != c_enc.shape())
    throw ShapeError("encoder_recon_loss: shape mismatch " + shape_str(c.shape()) + " vs " +
                     shape_str(c_enc.shape()));
  return tape.mean(tape.row_sums(tape.square(tape.sub(c, c_enc))));
}

}  // namespace did
