#include <doctest.h>

#include <cmath>
#include <random>

#include "hlstm/error.hpp"
#include "hlstm/optim.hpp"

using namespace hlstm;

TEST_CASE("sgd_step") {
  Vector w = Vector::Constant(1, 1.0);
  sgd_step(w, Vector::Constant(1, 2.0), 0.1);
  CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-15));

  Vector z = Vector::LinSpaced(4, -1, 1);
  const Vector before = z;
  sgd_step(z, Vector::Zero(4), 0.5);
  CHECK(z == before);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Vector p(10), g(10);
  for (Index i = 0; i < 10; ++i) {
    p[i] = n(rng);
    g[i] = n(rng);
  }
  Vector expect = p;
  for (Index i = 0; i < 10; ++i) expect[i] = p[i] - 0.03 * g[i];
  sgd_step(p, g, 0.03);
  CHECK(p == expect);
}

TEST_CASE("adam scalar trace") {
  Vector w = Vector::Constant(1, 0.5);
  AdamState s = AdamState::zeros(1);
  adam_step(w, Vector::Zero(1), s, 0.001);
  CHECK(w[0] == 0.5);
  CHECK(s.step_count == 1);

  Vector v = Vector::Constant(1, 0.5);
  AdamState t = AdamState::zeros(1);
  adam_step(v, Vector::Constant(1, 1.0), t, 0.001);
  // m1_hat = 1, m2_hat = 1.
  CHECK(t.m1[0] == doctest::Approx(0.1));
  CHECK(t.m2[0] == doctest::Approx(0.001));
  CHECK(0.5 - v[0] == doctest::Approx(0.001 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam update magnitude tends to eta under a constant gradient") {
  for (const double c : {-3.0, 0.02, 7.5}) {
    Vector w = Vector::Zero(1);
    AdamState s = AdamState::zeros(1);
    double last = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const double before = w[0];
      adam_step(w, Vector::Constant(1, c), s, 0.001);
      last = std::abs(w[0] - before);
    }
    CHECK(last == doctest::Approx(0.001).epsilon(1e-4));
  }
}

TEST_CASE("adam with beta1 = beta2 = 0 is sign descent") {
  Vector w = Vector::LinSpaced(3, -1, 1);
  AdamState s = AdamState::zeros(3, 0.0, 0.0, 0.0);
  const Vector g = (Vector(3) << 4.0, -0.25, 1e-3).finished();
  const Vector before = w;
  adam_step(w, g, s, 0.1);
  for (Index i = 0; i < 3; ++i) CHECK(w[i] == doctest::Approx(before[i] - 0.1 * (g[i] > 0 ? 1.0 : -1.0)));
}

TEST_CASE("adam minimizes a quadratic and keeps m2 non-negative") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Vector w(6);
  for (Index i = 0; i < 6; ++i) w[i] = n(rng);
  const Vector scale = (Vector(6) << 1, 2, 5, 0.5, 3, 10).finished();
  AdamState s = AdamState::zeros(6);
  int reached = -1;
  for (int k = 0; k < 2000; ++k) {
    const Vector g = 2.0 * scale.cwiseProduct(w);
    adam_step(w, g, s, 0.05);
    CHECK(s.m2.minCoeff() >= 0.0);
    if (reached < 0 && w.norm() < 1e-3) reached = k;
  }
  CHECK(reached >= 0);
  CHECK(w.norm() < 1e-3);
}

TEST_CASE("learning-rate decay") {
  LrSchedule s{0.001, 1.0};
  CHECK(decay_lr(s).eta == 0.001);

  LrSchedule d{0.001, 0.95};
  for (int e = 0; e < 150; ++e) d = decay_lr(d);
  CHECK(d.eta == doctest::Approx(4.5555497448365726e-07).epsilon(1e-12));

  LrSchedule tiny{1e-3, 0.5};
  for (int e = 0; e < 1000; ++e) tiny = decay_lr(tiny);
  CHECK(tiny.eta > 0.0);

  CHECK_THROWS_AS((LrSchedule{-1.0, 0.9}.validate()), ConfigError);
  CHECK_THROWS_AS((LrSchedule{1e-3, 1.5}.validate()), ConfigError);
}
