#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <did/nn.hpp>

#include <cmath>

using namespace did;

TEST_CASE("init_mlp: deterministic, bounded, zero biases") {
  auto a = init_mlp({4, 4}, {Activation::leaky_relu}, 42);
  auto b = init_mlp({4, 4}, {Activation::leaky_relu}, 42);
  CHECK(a.layers[0].W == b.layers[0].W);

  const double bound = std::sqrt(6.0 / 8.0);
  for (double w : a.layers[0].W) CHECK(std::abs(w) <= bound);
  for (double bias : a.layers[0].b) CHECK(bias == 0.0);

  auto c = init_mlp({4, 4}, {Activation::leaky_relu}, 43);
  CHECK(a.layers[0].W != c.layers[0].W);

  CHECK_THROWS_AS(init_mlp({4}, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(init_mlp({4, 0}, {Activation::identity}, 0), std::invalid_argument);
}

TEST_CASE("mlp forward: tape and raw paths agree, any batch size") {
  auto mlp = init_mlp({3, 5, 2}, {Activation::leaky_relu, Activation::tanh}, 1);
  for (std::size_t batch : {1u, 4u, 7u}) {
    std::vector<double> x(batch * 3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i) - 0.7;
    Tape tape;
    auto staged = mlp.stage(tape);
    auto out = mlp.forward(tape, staged, tape.leaf({batch, 3}, x));
    CHECK(out.shape() == Shape{batch, 2});
    auto raw = mlp.forward_raw(x, batch);
    REQUIRE(raw.size() == out.data().size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      CHECK(raw[i] == doctest::Approx(out.data()[i]).epsilon(1e-14));
  }
}

TEST_CASE("rmsprop matches the textbook recurrence") {
  SUBCASE("hand-evaluated scalar step") {
    std::vector<double> theta{1.0};
    RmsProp opt;
    opt.lr = 0.1;
    opt.rho = 0.9;
    opt.eps = 1e-8;
    opt.step({&theta}, {{1.0}});
    // v = 0.1, theta = 1 - 0.1/(sqrt(0.1)+1e-8)
    const double expect = 1.0 - 0.1 / (std::sqrt(0.1) + 1e-8);
    CHECK(theta[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(opt.v[0][0] == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("zero gradient leaves params unchanged") {
    std::vector<double> theta{2.5};
    RmsProp opt;
    opt.step({&theta}, {{0.0}});
    CHECK(theta[0] == 2.5);
  }
  SUBCASE("repeated identical gradients shrink the step") {
    std::vector<double> theta{0.0};
    RmsProp opt;
    opt.lr = 0.1;
    double prev = theta[0];
    opt.step({&theta}, {{1.0}});
    const double step1 = prev - theta[0];
    prev = theta[0];
    opt.step({&theta}, {{1.0}});
    const double step2 = prev - theta[0];
    CHECK(step2 < step1);
    CHECK(step2 > 0.0);
  }
  SUBCASE("longhand recurrence over several steps") {
    std::vector<double> theta{0.3};
    RmsProp opt;
    opt.lr = 0.01;
    double v = 0.0, ref = 0.3;
    for (int i = 0; i < 5; ++i) {
      const double g = 0.5 - 0.1 * i;
      v = 0.9 * v + 0.1 * g * g;
      ref -= 0.01 * g / (std::sqrt(v) + 1e-8);
      opt.step({&theta}, {{g}});
      CHECK(theta[0] == doctest::Approx(ref).epsilon(1e-12));
    }
  }
  SUBCASE("NaN gradient aborts") {
    std::vector<double> theta{1.0};
    RmsProp opt;
    CHECK_THROWS_AS(opt.step({&theta}, {{std::nan("")}}), NumericError);
    CHECK(theta[0] == 1.0);
  }
}

TEST_CASE("adam matches the textbook recurrence") {
  SUBCASE("zero gradient, fresh state: unchanged") {
    std::vector<double> theta{1.0};
    Adam opt;
    opt.step({&theta}, {{0.0}});
    CHECK(theta[0] == 1.0);
  }
  SUBCASE("first step moves by about lr in the gradient direction") {
    std::vector<double> theta{1.0, -1.0};
    Adam opt;
    opt.lr = 1e-3;
    opt.step({&theta}, {{0.7, -0.2}});
    CHECK(1.0 - theta[0] == doctest::Approx(1e-3).epsilon(1e-4));
    CHECK(theta[1] + 1.0 == doctest::Approx(1e-3).epsilon(1e-4));
  }
  SUBCASE("longhand bias-corrected recurrence") {
    std::vector<double> theta{0.2};
    Adam opt;
    opt.lr = 0.01;
    opt.beta1 = 0.5;
    opt.beta2 = 0.999;
    double m = 0.0, v = 0.0, ref = 0.2;
    for (int t = 1; t <= 5; ++t) {
      const double g = 1.0 / t;
      m = 0.5 * m + 0.5 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.5, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      opt.step({&theta}, {{g}});
      CHECK(theta[0] == doctest::Approx(ref).epsilon(1e-12));
    }
  }
  SUBCASE("elementwise: permuting parameter order permutes updates") {
    std::vector<double> a{1.0, 2.0};
    std::vector<double> b{2.0, 1.0};
    Adam o1, o2;
    o1.step({&a}, {{0.3, 0.8}});
    o2.step({&b}, {{0.8, 0.3}});
    CHECK(a[0] == b[1]);
    CHECK(a[1] == b[0]);
  }
  SUBCASE("NaN gradient aborts") {
    std::vector<double> theta{1.0};
    Adam opt;
    CHECK_THROWS_AS(opt.step({&theta}, {{std::nan("")}}), NumericError);
  }
}
