#pragma once

// The four networks: generator G, critic D, sample encoder E
// and difference encoder H, with desk-scale MLP defaults.

#include <did/nn.hpp>
#include <did/tensor.hpp>

#include <vector>

namespace did {

struct ModelSizes {
  std::size_t latent_dim = 6;      // n
  std::size_t diff_dim = 16;       // d_v
  std::size_t pixels = 256;        // H*W*C of the dataset
  std::vector<std::size_t> g_hidden{256, 256};
  std::vector<std::size_t> d_hidden{256, 256};
  std::vector<std::size_t> e_hidden{256, 256};
  std::vector<std::size_t> h_hidden{256, 128};
};

struct DidModels {
  Mlp G;  // latent -> pixels, tanh head rescaled to [0,1]
  Mlp D;  // pixels -> 1, linear head
  Mlp E;  // pixels -> latent, tanh head
  Mlp H;  // 2*pixels -> diff_dim, linear head
  ModelSizes sizes;
  bool normalize_diff = true;

  static DidModels init(const ModelSizes& sizes, std::uint64_t seed, bool normalize_diff = true) {
    auto arch = [](std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                   Activation head) {
      std::vector<std::size_t> s{in};
      s.insert(s.end(), hidden.begin(), hidden.end());
      s.push_back(out);
      std::vector<Activation> a(hidden.size(), Activation::leaky_relu);
      a.push_back(head);
      return std::pair{s, a};
    };
    DidModels m;
    m.sizes = sizes;
    m.normalize_diff = normalize_diff;
    auto [gs, ga] = arch(sizes.latent_dim, sizes.g_hidden, sizes.pixels, Activation::tanh);
    auto [ds, da] = arch(sizes.pixels, sizes.d_hidden, 1, Activation::identity);
    auto [es, ea] = arch(sizes.pixels, sizes.e_hidden, sizes.latent_dim, Activation::tanh);
    auto [hs, ha] = arch(2 * sizes.pixels, sizes.h_hidden, sizes.diff_dim, Activation::identity);
    m.G = init_mlp(gs, ga, splitmix64(seed ^ 0x47ULL));
    m.D = init_mlp(ds, da, splitmix64(seed ^ 0x44ULL));
    m.E = init_mlp(es, ea, splitmix64(seed ^ 0x45ULL));
    m.H = init_mlp(hs, ha, splitmix64(seed ^ 0x48ULL));
    return m;
  }
};

// c: [batch, n] with entries in [-1,1]; returns images in [0,1], [batch, pixels].
inline Tensor generate(const Mlp& G, Tape& tape, const std::vector<StagedLayer>& staged, Tensor c) {
  if (c.shape().size() != 2 || c.shape()[1] != G.in_dim())
    throw ShapeError("generate: latent batch must be [B," + std::to_string(G.in_dim()) + "], got " +
                     shape_str(c.shape()));
  // tanh output mapped by (t+1)/2
  return tape.offset(tape.scale(G.forward(tape, staged, c), 0.5), 0.5);
}

inline std::vector<double> generate_raw(const Mlp& G, const std::vector<double>& c, std::size_t batch) {
  auto out = G.forward_raw(c, batch);
  for (auto& v : out) v = 0.5 * v + 0.5;
  return out;
}

// x: [batch, pixels]; returns codes in [-1,1], [batch, n].
inline Tensor encode(const Mlp& E, Tape& tape, const std::vector<StagedLayer>& staged, Tensor x) {
  if (x.shape().size() != 2 || x.shape()[1] != E.in_dim())
    throw ShapeError("encode: image batch must be [B," + std::to_string(E.in_dim()) + "], got " +
                     shape_str(x.shape()));
  return E.forward(tape, staged, x);
}

// pairs: [k, 2*pixels], the ordered concatenation [x, x'] per row.
// Returns [k, d_v]; rows unit-normalized when requested.
inline Tensor encode_difference(const Mlp& H, Tape& tape, const std::vector<StagedLayer>& staged,
                                Tensor pairs, bool normalize) {
  if (pairs.shape().size() != 2 || pairs.shape()[1] != H.in_dim())
    throw ShapeError("encode_difference: pair batch must be [k," + std::to_string(H.in_dim()) +
                     "], got " + shape_str(pairs.shape()));
  Tensor v = H.forward(tape, staged, pairs);
  if (normalize) v = tape.div(v, tape.bcast_rows(tape.l2_norm_rows(v), v.shape()[1]));
  return v;
}

}  // namespace did
