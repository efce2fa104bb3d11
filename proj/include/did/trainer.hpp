#pragma once

// Alternating optimization: n_critic Adam steps on the critic, then one joint
// RMSProp step over generator, sample encoder and difference encoder, with
// periodic metric logging and checkpointing.

#include <did/checkpoint.hpp>
#include <did/config.hpp>
#include <did/data.hpp>
#include <did/latent.hpp>
#include <did/losses.hpp>
#include <did/metrics.hpp>
#include <did/models.hpp>

#include <functional>
#include <string>
#include <vector>

namespace did {

struct TrainState {
  TrainConfig cfg;
  DidModels models;
  RmsProp opt_g;  // shared across G, E, H
  Adam opt_d;
  std::uint64_t step = 0;
};

inline TrainState init_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.cfg = cfg;
  st.models = DidModels::init(cfg.sizes, cfg.seed, cfg.normalize_diff);
  st.opt_g.lr = cfg.lr_g;
  st.opt_g.rho = cfg.rmsprop_rho;
  st.opt_d.lr = cfg.lr_d;
  st.opt_d.beta1 = cfg.adam_beta1;
  st.opt_d.beta2 = cfg.adam_beta2;
  return st;
}

namespace detail {

inline std::vector<std::vector<double>> grad_values(Tape& tape, Tensor loss,
                                                    const std::vector<StagedLayer>& staged) {
  std::vector<Tensor> wrt;
  for (const auto& s : staged) {
    wrt.push_back(s.W);
    wrt.push_back(s.b);
  }
  auto grads = tape.backward(loss, wrt);
  std::vector<std::vector<double>> out;
  out.reserve(grads.size());
  for (const auto& g : grads) out.push_back(g.data());
  return out;
}

}  // namespace detail

// One Adam update on D; G, E, H untouched. `real` is a [batch, pixels] batch.
inline LossBreakdown critic_step(TrainState& st, const std::vector<double>& real,
                                 std::mt19937_64& rng) {
  const auto& cfg = st.cfg;
  auto& m = st.models;
  const auto fake =
      generate_raw(m.G, sample_prior(cfg.sizes.latent_dim, cfg.batch, rng), cfg.batch);

  Tape tape;
  auto staged_d = m.D.stage(tape);
  Tensor gp{};
  Tensor loss = critic_loss(m.D, tape, staged_d, real, fake, cfg.batch, cfg.lambda, rng, &gp);
  st.opt_d.step(m.D.params(), detail::grad_values(tape, loss, staged_d));

  LossBreakdown out;
  out.l_d = loss.scalar();
  out.gp = gp.id >= 0 ? gp.scalar() : 0.0;
  return out;
}

// One joint RMSProp update over G, E and H on l_g + w_h*l_h + w_enc*l_enc.
// k_compare < 2 drops the difference term (l_h reported as 0, H untouched).
inline LossBreakdown generator_step(TrainState& st, std::mt19937_64& rng) {
  const auto& cfg = st.cfg;
  auto& m = st.models;
  const bool with_h = cfg.k_compare >= 2;

  Tape tape;
  auto staged_g = m.G.stage(tape);
  auto staged_d = m.D.stage(tape);
  auto staged_e = m.E.stage(tape);
  auto staged_h = with_h ? m.H.stage(tape) : std::vector<StagedLayer>{};

  Tensor c = tape.leaf({cfg.batch, cfg.sizes.latent_dim},
                       sample_prior(cfg.sizes.latent_dim, cfg.batch, rng));
  Tensor x = generate(m.G, tape, staged_g, c);
  Tensor l_g = generator_adv_loss(tape, m.D.forward(tape, staged_d, x));
  Tensor l_enc = encoder_recon_loss(tape, c, encode(m.E, tape, staged_e, x));

  Tensor total = tape.add(l_g, tape.scale(l_enc, cfg.w_enc));
  Tensor l_h{};
  if (with_h) {
    const auto plan = make_plan(sample_prior(cfg.sizes.latent_dim, 1, rng), cfg.k_compare,
                                cfg.delta_min, cfg.delta_max, rng);
    Tensor pairs = make_pairs(m.G, tape, staged_g, plan);
    Tensor vs = encode_difference(m.H, tape, staged_h, pairs, m.normalize_diff);
    l_h = contrastive_difference_loss(tape, vs);
    total = tape.add(total, tape.scale(l_h, cfg.w_h));
  }

  std::vector<StagedLayer> staged_geh = staged_g;
  staged_geh.insert(staged_geh.end(), staged_e.begin(), staged_e.end());
  staged_geh.insert(staged_geh.end(), staged_h.begin(), staged_h.end());
  auto params = m.G.params();
  for (auto* p : m.E.params()) params.push_back(p);
  if (with_h)
    for (auto* p : m.H.params()) params.push_back(p);
  st.opt_g.step(params, detail::grad_values(tape, total, staged_geh));

  LossBreakdown out;
  out.l_g = l_g.scalar();
  out.l_enc = l_enc.scalar();
  out.l_h = with_h ? l_h.scalar() : 0.0;
  out.l_total = total.scalar();
  return out;
}

struct TrainLogRow {
  std::uint64_t step = 0;
  double l_g = 0, l_d = 0, l_h = 0, l_enc = 0, gp = 0, tc = 0, mig = 0;
  double l_total = 0;  // in-memory only, not a CSV column
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
};

inline std::string train_log_header() { return "step,l_g,l_d,l_h,l_enc,gp,tc,mig"; }

inline std::string train_log_csv_row(const TrainLogRow& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.step << ',' << r.l_g << ',' << r.l_d << ',' << r.l_h << ',' << r.l_enc << ',' << r.gp
     << ',' << r.tc << ',' << r.mig;
  return os.str();
}

// Runs from st.step (exclusive) to cfg.steps; all per-step randomness comes
// from stream_rng(seed, step, stream) so a resumed run replays exactly.
// `on_eval` fires after each eval row is appended (checkpointing hook).
inline TrainLog train(TrainState& st, const FactorDataset& ds,
                      const std::function<void(const TrainState&, const TrainLogRow&)>& on_eval = {}) {
  const auto& cfg = st.cfg;
  if (ds.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (ds.spec.pixels() != cfg.sizes.pixels)
    throw ConfigError("train: dataset has " + std::to_string(ds.spec.pixels()) +
                      " pixels per image, model expects " + std::to_string(cfg.sizes.pixels));
  TrainLog log;
  while (st.step < cfg.steps) {
    const std::uint64_t step = st.step + 1;
    try {
      LossBreakdown critic_frag;
      for (std::size_t j = 0; j < cfg.n_critic; ++j) {
        auto rng = stream_rng(cfg.seed, step, 2 + j);
        BatchSampler sampler(ds, cfg.batch, stream_rng(cfg.seed, step, 100 + j));
        critic_frag = critic_step(st, sampler.next(), rng);
      }
      auto rng = stream_rng(cfg.seed, step, 1);
      LossBreakdown gen_frag = generator_step(st, rng);
      st.step = step;

      if (step % cfg.eval_every == 0) {
        auto report = eval_all(st.models.E, ds, cfg.bins);
        TrainLogRow row;
        row.step = step;
        row.l_g = gen_frag.l_g;
        row.l_d = critic_frag.l_d;
        row.l_h = gen_frag.l_h;
        row.l_enc = gen_frag.l_enc;
        row.gp = critic_frag.gp;
        row.tc = report.tc;
        row.mig = report.mig;
        row.l_total = gen_frag.l_total;
        log.rows.push_back(row);
        if (on_eval) on_eval(st, row);
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (at step " + std::to_string(step) + ")");
    }
  }
  return log;
}

// Checkpoint packing: model parameters plus both optimizers' state, so a
// resumed run is bit-identical to an uninterrupted one.
namespace detail {

inline void pack_mlp(std::vector<NamedTensor>& out, const std::string& prefix, const Mlp& m) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    out.push_back({prefix + "." + std::to_string(i) + ".W",
                   {static_cast<std::uint32_t>(l.out), static_cast<std::uint32_t>(l.in)}, l.W});
    out.push_back({prefix + "." + std::to_string(i) + ".b",
                   {static_cast<std::uint32_t>(l.out)}, l.b});
  }
}

inline void unpack_mlp(const Checkpoint& cp, const std::string& prefix, Mlp& m) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    auto& l = m.layers[i];
    for (const char* part : {"W", "b"}) {
      const auto name = prefix + "." + std::to_string(i) + "." + part;
      const auto* t = cp.find(name);
      if (!t) throw FormatError("didc: missing tensor " + name);
      auto& dst = part[0] == 'W' ? l.W : l.b;
      if (t->data.size() != dst.size())
        throw FormatError("didc: size mismatch for tensor " + name);
      dst = t->data;
    }
  }
}

inline void pack_moments(std::vector<NamedTensor>& out, const std::string& prefix,
                         const std::vector<std::vector<double>>& moments) {
  for (std::size_t i = 0; i < moments.size(); ++i)
    out.push_back({prefix + "." + std::to_string(i),
                   {static_cast<std::uint32_t>(moments[i].size())}, moments[i]});
}

inline void unpack_moments(const Checkpoint& cp, const std::string& prefix,
                           std::vector<std::vector<double>>& moments, std::size_t count) {
  moments.clear();
  for (std::size_t i = 0; i < count; ++i) {
    const auto name = prefix + "." + std::to_string(i);
    const auto* t = cp.find(name);
    if (!t) return;  // optimizer not yet initialized when saved
    moments.push_back(t->data);
  }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const TrainState& st) {
  Checkpoint cp;
  cp.step = st.step;
  cp.config_text = st.cfg.to_text();
  detail::pack_mlp(cp.tensors, "g", st.models.G);
  detail::pack_mlp(cp.tensors, "d", st.models.D);
  detail::pack_mlp(cp.tensors, "e", st.models.E);
  detail::pack_mlp(cp.tensors, "h", st.models.H);
  detail::pack_moments(cp.tensors, "opt_g.v", st.opt_g.v);
  detail::pack_moments(cp.tensors, "opt_d.m", st.opt_d.m);
  detail::pack_moments(cp.tensors, "opt_d.v", st.opt_d.v);
  cp.tensors.push_back({"opt_d.t", {1}, {static_cast<double>(st.opt_d.t)}});
  write_checkpoint(path, cp);
}

inline TrainState load_train_state(const std::string& path) {
  const auto cp = read_checkpoint(path);
  auto st = init_train_state(TrainConfig::from_text(parse_config_text(cp.config_text)));
  st.step = cp.step;
  detail::unpack_mlp(cp, "g", st.models.G);
  detail::unpack_mlp(cp, "d", st.models.D);
  detail::unpack_mlp(cp, "e", st.models.E);
  detail::unpack_mlp(cp, "h", st.models.H);
  const std::size_t n_geh =
      st.models.G.layers.size() * 2 + st.models.E.layers.size() * 2 +
      (st.cfg.k_compare >= 2 ? st.models.H.layers.size() * 2 : 0);
  detail::unpack_moments(cp, "opt_g.v", st.opt_g.v, n_geh);
  detail::unpack_moments(cp, "opt_d.m", st.opt_d.m, st.models.D.layers.size() * 2);
  detail::unpack_moments(cp, "opt_d.v", st.opt_d.v, st.models.D.layers.size() * 2);
  if (const auto* t = cp.find("opt_d.t")) st.opt_d.t = static_cast<std::uint64_t>(t->data[0]);
  return st;
}

}  // namespace did
