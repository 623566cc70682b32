#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sace/error.hpp"
#include "sace/numerics.hpp"
#include "sace/parallel.hpp"

using namespace sace;

TEST_CASE("expit values") {
  CHECK(expit(0.0) == 0.5);
  CHECK(std::abs(expit(0.55) - 0.63413559101080068274) < 1e-12);
  for (double x : {-3.0, 0.55, 10.0}) CHECK(expit(x) == doctest::Approx(1.0 - expit(-x)).epsilon(1e-15));
  CHECK(expit(-700.0) > 0.0);
  CHECK(std::isfinite(expit(800.0)));
  CHECK(expit(-800.0) >= 0.0);
}

TEST_CASE("logit inverts expit") {
  for (double p : {1e-6, 0.2, 0.5, 0.9}) CHECK(expit(logit(p)) == doctest::Approx(p).epsilon(1e-12));
  CHECK_THROWS_AS(logit(0.0), Error);
  CHECK_THROWS_AS(logit(1.5), Error);
  CHECK(log_expit(-800.0) == doctest::Approx(-800.0));
  CHECK(log_expit(2.0) == doctest::Approx(std::log(1.0 / (1.0 + std::exp(-2.0)))));
}

TEST_CASE("moment solver on closed-form roots") {
  MomentSystem linear{1, [](const Vector& t) { return Vector::Constant(1, t(0) - 2.0); }, nullptr};
  CHECK(solve_moments(linear, Vector::Zero(1)).theta(0) == doctest::Approx(2.0).epsilon(1e-10));

  MomentSystem logistic{1, [](const Vector& t) { return Vector::Constant(1, expit(t(0)) - 0.75); }, nullptr};
  const auto res = solve_moments(logistic, Vector::Zero(1));
  CHECK(std::abs(res.theta(0) - 1.0986122886681096914) < 1e-7);
  CHECK(res.residual_norm <= 1e-8);
}

TEST_CASE("moment solver reports failures") {
  MomentSystem none{1, [](const Vector& t) { return Vector::Constant(1, std::exp(t(0)) + 1.0); }, nullptr};
  CHECK_THROWS_AS(solve_moments(none, Vector::Zero(1)), Error);

  MomentSystem flat{2,
                    [](const Vector& t) {
                      Vector g(2);
                      g << t(0) + t(1) - 1.0, 2.0 * (t(0) + t(1)) - 3.0;
                      return g;
                    },
                    nullptr};
  try {
    solve_moments(flat, Vector::Zero(2));
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK((e.kind() == ErrorKind::SingularJacobian || e.kind() == ErrorKind::NonConvergence));
  }
}

TEST_CASE("maximizer on closed-form optima") {
  LogLikelihood bern;
  bern.value = [](const Vector& t) { return 7.0 * log_expit(t(0)) + 3.0 * log_expit(-t(0)); };
  const auto b = maximize_loglik(bern, Vector::Zero(1));
  CHECK(std::abs(b.theta(0) - 0.84729786038720361371) < 1e-6);
  for (std::size_t i = 1; i < b.trace.size(); ++i) CHECK(b.trace[i] >= b.trace[i - 1] - 1e-12);

  LogLikelihood quad;
  quad.value = [](const Vector& t) { return -(t(0) - 3.0) * (t(0) - 3.0); };
  quad.gradient = [](const Vector& t) { return Vector::Constant(1, -2.0 * (t(0) - 3.0)); };
  quad.hessian = [](const Vector&) { return Matrix::Constant(1, 1, -2.0); };
  CHECK(maximize_loglik(quad, Vector::Zero(1)).theta(0) == doctest::Approx(3.0));
}

TEST_CASE("separated likelihood is degenerate") {
  LogLikelihood sep;
  sep.value = [](const Vector& t) { return 10.0 * log_expit(t(0)); };
  try {
    maximize_loglik(sep, Vector::Zero(1));
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateLikelihood);
  }
}

TEST_CASE("finite differences") {
  Vector t(2);
  t << 1.0, 2.0;
  const Vector g = numerical_gradient([](const Vector& v) { return v.squaredNorm(); }, t, 1e-6);
  CHECK(std::abs(g(0) - 2.0) < 1e-6);
  CHECK(std::abs(g(1) - 4.0) < 1e-6);

  Matrix a(2, 2);
  a << 1.0, -2.0, 0.5, 3.0;
  const Matrix j = numerical_jacobian([&](const Vector& v) -> Vector { return a * v; }, t, 1e-6);
  CHECK((j - a).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("random streams") {
  auto s1 = seeded_stream(42, 0);
  auto s2 = seeded_stream(42, 0);
  auto s3 = seeded_stream(42, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double u = s1.uniform();
    CHECK(u == s2.uniform());
    differs |= u != s3.uniform();
  }
  CHECK(differs);

  auto big = seeded_stream(42, 3);
  double sum = 0.0;
  for (int i = 0; i < 1000000; ++i) sum += big.uniform();
  CHECK(std::abs(sum / 1e6 - 0.5) < 0.002);
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("parallel_for fills every slot") {
  std::vector<int> out(1000, 0);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i); });
  std::vector<int> expect(1000);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(out == expect);
  CHECK_THROWS(parallel_for(10, 2, [](std::size_t i) {
    if (i == 7) throw std::runtime_error("boom");
  }));
}
