#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <did/latent.hpp>
#include <did/losses.hpp>
#include <did/models.hpp>

#include <algorithm>
#include <cmath>
#include <map>

using namespace did;

namespace {
ModelSizes tiny_sizes() {
  ModelSizes s;
  s.latent_dim = 4;
  s.diff_dim = 5;
  s.pixels = 9;
  s.g_hidden = {8};
  s.d_hidden = {8};
  s.e_hidden = {8};
  s.h_hidden = {8};
  return s;
}
}  // namespace

TEST_CASE("generate: shape, determinism, range") {
  auto m = DidModels::init(tiny_sizes(), 9);
  Tape tape;
  auto staged = m.G.stage(tape);
  std::mt19937_64 rng(1);
  auto c = sample_prior(4, 2, rng);
  auto imgs = generate(m.G, tape, staged, tape.leaf({2, 4}, c));
  CHECK(imgs.shape() == Shape{2, 9});
  for (double v : imgs.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // identical codes give identical images
  std::vector<double> cc(c.begin(), c.begin() + 4);
  cc.insert(cc.end(), c.begin(), c.begin() + 4);
  auto imgs2 = generate(m.G, tape, staged, tape.leaf({2, 4}, cc));
  for (std::size_t j = 0; j < 9; ++j) CHECK(imgs2.data()[j] == imgs2.data()[9 + j]);

  CHECK_THROWS_AS(generate(m.G, tape, staged, tape.leaf({2, 3}, std::vector<double>(6, 0.0))),
                  ShapeError);
}

TEST_CASE("encode: shape and tanh bounds") {
  auto m = DidModels::init(tiny_sizes(), 9);
  Tape tape;
  auto staged = m.E.stage(tape);
  std::vector<double> x(3 * 9, 0.5);
  x[4] = 0.9;
  auto codes = encode(m.E, tape, staged, tape.leaf({3, 9}, x));
  CHECK(codes.shape() == Shape{3, 4});
  for (double v : codes.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(encode(m.E, tape, staged, tape.leaf({3, 7}, std::vector<double>(21, 0.0))),
                  ShapeError);
}

TEST_CASE("encode_difference: normalization and order sensitivity") {
  auto m = DidModels::init(tiny_sizes(), 9);
  Tape tape;
  auto staged = m.H.stage(tape);
  std::vector<double> ab(18), ba(18);
  for (int i = 0; i < 9; ++i) {
    ab[i] = 0.1 * i;
    ab[9 + i] = 1.0 - 0.1 * i;
    ba[i] = ab[9 + i];
    ba[9 + i] = ab[i];
  }
  auto v1 = encode_difference(m.H, tape, staged, tape.leaf({1, 18}, ab), true);
  CHECK(v1.shape() == Shape{1, 5});
  double norm = 0.0;
  for (double x : v1.data()) norm += x * x;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));

  auto v2 = encode_difference(m.H, tape, staged, tape.leaf({1, 18}, ba), true);
  CHECK(v1.data() != v2.data());  // ordered concatenation

  auto v3 = encode_difference(m.H, tape, staged, tape.leaf({1, 18}, ab), true);
  CHECK(v1.data() == v3.data());
}

TEST_CASE("sample_prior: support, determinism, mean") {
  std::mt19937_64 rng(123);
  auto batch = sample_prior(3, 100000, rng);
  double mean[3] = {0, 0, 0};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch[i] >= -1.0);
    CHECK(batch[i] <= 1.0);
    mean[i % 3] += batch[i];
  }
  for (double m : mean) CHECK(std::abs(m / 100000.0) < 0.02);

  std::mt19937_64 r1(7), r2(7);
  CHECK(sample_prior(4, 10, r1) == sample_prior(4, 10, r2));
  CHECK_THROWS_AS(sample_prior(0, 1, rng), std::invalid_argument);
}

TEST_CASE("make_plan: exact step, bounds, axis sampling") {
  SUBCASE("interior point steps positively") {
    std::mt19937_64 rng(1);
    std::vector<double> base(6, 0.0);
    auto plan = make_plan(base, 2, 0.5, 0.5, rng);
    CHECK(plan.delta == doctest::Approx(0.5));
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(plan.perturbed[i][plan.axes[i]] == doctest::Approx(0.5).epsilon(1e-12));
      // only one coordinate differs
      for (std::size_t j = 0; j < 6; ++j)
        if (j != plan.axes[i]) CHECK(plan.perturbed[i][j] == base[j]);
    }
    CHECK(plan.axes[0] != plan.axes[1]);
  }
  SUBCASE("sign flips near the boundary") {
    std::mt19937_64 rng(1);
    std::vector<double> base(3, 0.9);
    auto plan = make_plan(base, 2, 0.5, 0.5, rng);
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(plan.perturbed[i][plan.axes[i]] == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("every plan satisfies the exact-step invariant") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 2000; ++trial) {
      auto base = sample_prior(5, 1, rng);
      auto plan = make_plan(base, 3, 0.3, 0.8, rng);
      for (std::size_t i = 0; i < plan.axes.size(); ++i) {
        std::size_t diffs = 0;
        for (std::size_t j = 0; j < 5; ++j) {
          if (plan.perturbed[i][j] != base[j]) {
            ++diffs;
            CHECK(j == plan.axes[i]);
            CHECK(std::abs(plan.perturbed[i][j] - base[j]) == doctest::Approx(plan.delta).epsilon(1e-12));
          }
          CHECK(plan.perturbed[i][j] >= -1.0);
          CHECK(plan.perturbed[i][j] <= 1.0);
        }
        CHECK(diffs == 1);
      }
    }
  }
  SUBCASE("axis subsets are uniform") {
    std::mt19937_64 rng(5);
    std::map<std::pair<std::size_t, std::size_t>, int> counts;
    const int trials = 100000;
    std::vector<double> base(4, 0.0);
    for (int t = 0; t < trials; ++t) {
      auto plan = make_plan(base, 2, 0.5, 0.5, rng);
      auto key = std::minmax(plan.axes[0], plan.axes[1]);
      counts[key]++;
    }
    CHECK(counts.size() == 6);  // all C(4,2) subsets reachable
    const double expect = trials / 6.0;
    const double sigma = std::sqrt(trials * (1.0 / 6.0) * (5.0 / 6.0));
    for (auto& [k, c] : counts) CHECK(std::abs(c - expect) < 3.5 * sigma);
  }
  SUBCASE("validation") {
    std::mt19937_64 rng(1);
    std::vector<double> base(3, 0.0);
    CHECK_THROWS_AS(make_plan(base, 4, 0.3, 0.8, rng), std::invalid_argument);
    CHECK_THROWS_AS(make_plan(base, 2, 0.3, 2.5, rng), std::invalid_argument);
  }
}

TEST_CASE("make_pairs: shared first element, generator consistency") {
  auto m = DidModels::init(tiny_sizes(), 21);
  std::mt19937_64 rng(3);
  auto base = sample_prior(4, 1, rng);
  auto plan = make_plan(base, 3, 0.4, 0.6, rng);

  Tape tape;
  auto staged = m.G.stage(tape);
  auto pairs = make_pairs(m.G, tape, staged, plan);
  CHECK(pairs.shape() == Shape{3, 18});

  auto x = generate_raw(m.G, base, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 9; ++j)
      CHECK(pairs.data()[i * 18 + j] == doctest::Approx(x[j]).epsilon(1e-12));
    auto xi = generate_raw(m.G, plan.perturbed[i], 1);
    for (std::size_t j = 0; j < 9; ++j)
      CHECK(pairs.data()[i * 18 + 9 + j] == doctest::Approx(xi[j]).epsilon(1e-12));
  }

  SUBCASE("zero step degenerates to identical pair halves") {
    PerturbationPlan degenerate;
    degenerate.base = base;
    degenerate.axes = {0, 1};
    degenerate.delta = 0.0;
    degenerate.perturbed = {base, base};
    Tape t2;
    auto s2 = m.G.stage(t2);
    auto p2 = make_pairs(m.G, t2, s2, degenerate);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 9; ++j)
        CHECK(p2.data()[i * 18 + j] == p2.data()[i * 18 + 9 + j]);
  }
}

TEST_CASE("traversal_codes") {
  std::vector<double> base{0.2, -0.3, 0.7};
  auto codes = traversal_codes(base, 1, 3);
  REQUIRE(codes.size() == 3);
  CHECK(codes[0][1] == -1.0);
  CHECK(codes[1][1] == 0.0);
  CHECK(codes[2][1] == 1.0);
  for (const auto& c : codes) {
    CHECK(c[0] == 0.2);
    CHECK(c[2] == 0.7);
  }
  auto eight = traversal_codes(base, 2, 8);
  CHECK(eight.size() == 8);
  for (const auto& c : eight) {
    CHECK(c[0] == base[0]);
    CHECK(c[1] == base[1]);
  }
  CHECK_THROWS_AS(traversal_codes(base, 3, 4), std::invalid_argument);
  CHECK_THROWS_AS(traversal_codes(base, 0, 1), std::invalid_argument);
}

TEST_CASE("generator adversarial loss") {
  Tape tape;
  auto scores = tape.leaf({2}, {1.0, 3.0});
  CHECK(generator_adv_loss(tape, scores).scalar() == -2.0);
  auto zeros = tape.leaf({3}, {0.0, 0.0, 0.0});
  CHECK(generator_adv_loss(tape, zeros).scalar() == 0.0);
  // shifting every score by k shifts the loss by -k
  auto shifted = tape.offset(scores, 5.0);
  CHECK(generator_adv_loss(tape, shifted).scalar() == doctest::Approx(-7.0).epsilon(1e-12));
}

TEST_CASE("gradient penalty: analytic linear critic") {
  // D(x) = w.x with w = (3,4): gradient is w everywhere, penalty (5-1)^2 = 16
  Mlp lin;
  DenseLayer l;
  l.in = 2;
  l.out = 1;
  l.W = {3.0, 4.0};
  l.b = {0.0};
  l.act = Activation::identity;
  lin.layers.push_back(l);

  std::mt19937_64 rng(2);
  std::vector<double> real{0.1, 0.9, 0.4, 0.3};
  std::vector<double> fake{0.8, 0.2, 0.6, 0.7};
  Tape tape;
  auto staged = lin.stage(tape);
  auto gp = gradient_penalty(lin, tape, staged, real, fake, 2, rng);
  CHECK(gp.scalar() == doctest::Approx(16.0).epsilon(1e-12));

  SUBCASE("unit-gradient critic has zero penalty") {
    Mlp unit = lin;
    unit.layers[0].W = {0.6, 0.8};
    Tape t2;
    auto s2 = unit.stage(t2);
    CHECK(gradient_penalty(unit, t2, s2, real, fake, 2, rng).scalar() ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("penalty is nonnegative for a random critic") {
    auto m = init_mlp({2, 6, 1}, {Activation::leaky_relu, Activation::identity}, 77);
    Tape t2;
    auto s2 = m.stage(t2);
    CHECK(gradient_penalty(m, t2, s2, real, fake, 2, rng).scalar() >= 0.0);
  }
}

TEST_CASE("gradient penalty double-backprop matches finite differences on a 2-layer critic") {
  auto critic = init_mlp({3, 4, 1}, {Activation::leaky_relu, Activation::identity}, 5);
  std::vector<double> real{0.1, 0.9, 0.2, 0.7, 0.3, 0.5};
  std::vector<double> fake{0.6, 0.4, 0.8, 0.2, 0.9, 0.1};

  // perturb each critic parameter, recompute the penalty value numerically
  auto penalty_at = [&](const Mlp& m) {
    std::mt19937_64 rng(42);
    Tape tape;
    auto staged = m.stage(tape);
    return gradient_penalty(m, tape, staged, real, fake, 2, rng).scalar();
  };

  std::mt19937_64 rng(42);
  Tape tape;
  auto staged = critic.stage(tape);
  auto gp = gradient_penalty(critic, tape, staged, real, fake, 2, rng);
  std::vector<Tensor> wrt;
  for (auto& s : staged) {
    wrt.push_back(s.W);
    wrt.push_back(s.b);
  }
  auto grads = tape.backward(gp, wrt);

  const double eps = 1e-5;
  auto params = critic.params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p]->size(); ++i) {
      Mlp plus = critic, minus = critic;
      (*plus.params()[p])[i] += eps;
      (*minus.params()[p])[i] -= eps;
      const double numeric = (penalty_at(plus) - penalty_at(minus)) / (2.0 * eps);
      const double analytic = grads[p].data()[i];
      const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
      REQUIRE(std::abs(analytic - numeric) / denom < 1e-4);
    }
  }
}

TEST_CASE("critic loss arithmetic") {
  Mlp identity_critic;
  DenseLayer l;
  l.in = 1;
  l.out = 1;
  l.W = {1.0};
  l.b = {0.0};
  l.act = Activation::identity;
  identity_critic.layers.push_back(l);

  std::mt19937_64 rng(1);
  SUBCASE("D(real)=[2], D(fake)=[1], lambda=0 gives -1") {
    Tape tape;
    auto staged = identity_critic.stage(tape);
    auto loss = critic_loss(identity_critic, tape, staged, {2.0}, {1.0}, 1, 0.0, rng);
    CHECK(loss.scalar() == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("identical real and fake batches: adversarial part is zero") {
    Tape tape;
    auto staged = identity_critic.stage(tape);
    auto loss = critic_loss(identity_critic, tape, staged, {0.4, 0.6}, {0.4, 0.6}, 2, 0.0, rng);
    CHECK(loss.scalar() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("unit-gradient critic: only the adversarial part survives lambda=10") {
    Tape tape;
    auto staged = identity_critic.stage(tape);
    Tensor gp;
    auto loss =
        critic_loss(identity_critic, tape, staged, {2.0}, {1.0}, 1, 10.0, rng, &gp);
    CHECK(gp.scalar() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(loss.scalar() == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("contrastive difference loss") {
  Tape tape;
  SUBCASE("identical vectors give 0") {
    auto vs = tape.leaf({2, 3}, {1, 2, 3, 1, 2, 3});
    CHECK(contrastive_difference_loss(tape, vs).scalar() == 0.0);
  }
  SUBCASE("unit basis pair gives -sqrt(2)") {
    auto vs = tape.leaf({2, 2}, {1, 0, 0, 1});
    CHECK(contrastive_difference_loss(tape, vs).scalar() ==
          doctest::Approx(-std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("antipodal unit vectors give the lower bound -2") {
    auto vs = tape.leaf({2, 2}, {1, 0, -1, 0});
    CHECK(contrastive_difference_loss(tape, vs).scalar() == doctest::Approx(-2.0).epsilon(1e-12));
  }
  SUBCASE("k-way mean over pairs, permutation invariant") {
    std::vector<double> rows{1, 0, 0, 1, -1, 0};
    auto vs = tape.leaf({3, 2}, rows);
    const double v = contrastive_difference_loss(tape, vs).scalar();
    std::vector<double> perm{0, 1, -1, 0, 1, 0};
    auto vs2 = tape.leaf({3, 2}, perm);
    CHECK(contrastive_difference_loss(tape, vs2).scalar() == doctest::Approx(v).epsilon(1e-12));
    // hand value: (sqrt2 + 2 + sqrt2)/3, negated
    CHECK(v == doctest::Approx(-(2.0 * std::sqrt(2.0) + 2.0) / 3.0).epsilon(1e-12));
  }
  SUBCASE("k < 2 rejected") {
    auto vs = tape.leaf({1, 2}, {1, 0});
    CHECK_THROWS_AS(contrastive_difference_loss(tape, vs), std::invalid_argument);
  }
}

TEST_CASE("encoder reconstruction loss") {
  Tape tape;
  auto c = tape.leaf({1, 2}, {1.0, -1.0});
  auto same = tape.leaf({1, 2}, {1.0, -1.0});
  CHECK(encoder_recon_loss(tape, c, same).scalar() == 0.0);
  auto zero = tape.leaf({1, 2}, {0.0, 0.0});
  CHECK(encoder_recon_loss(tape, c, zero).scalar() == doctest::Approx(2.0).epsilon(1e-12));
  auto wrong = tape.leaf({1, 3}, {0.0, 0.0, 0.0});
  CHECK_THROWS_AS(encoder_recon_loss(tape, c, wrong), ShapeError);
}
