#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sace/error.hpp"
#include "sace/model_data.hpp"
#include "sace/strata_model.hpp"

using namespace sace;
using testing::rec;

namespace {

StrataParams truth() {
  StrataParams p;
  p.beta1 = Vector(3);
  p.beta1 << 0.55, 0.25, 1.0;
  p.beta2 = Vector(3);
  p.beta2 << 0.45, -0.5, 1.0;
  return p;
}

Dataset survival_counts(int n1, int alive1, int n0, int alive0, double a = 0.0) {
  std::vector<ObservationRecord> rows;
  for (int i = 0; i < n1; ++i) rows.push_back(i < alive1 ? rec(1, 1, 1, i % 2, a) : rec(1, 0, 0, std::nullopt, a));
  for (int i = 0; i < n0; ++i) rows.push_back(i < alive0 ? rec(0, 1, 1, i % 2, a) : rec(0, 0, 0, std::nullopt, a));
  return Dataset(rows, {});
}

}  // namespace

TEST_CASE("stratum probabilities at a point") {
  const double c0[] = {0.0};
  const auto p = strata_probs(truth(), 0.0, c0);
  CHECK(std::abs(p.never_survivor - 0.36586440898919931726) < 1e-12);
  CHECK(std::abs(p.always_survivor - 0.38722807151477247017) < 1e-12);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[Stratum::Protected] == doctest::Approx(p.protected_survivor));

  StrataParams extreme;
  extreme.beta1 = Vector::Constant(3, 0.0);
  extreme.beta2 = Vector::Constant(3, 0.0);
  extreme.beta1(0) = extreme.beta2(0) = 800.0;
  const auto e = strata_probs(extreme, 0.0, c0);
  CHECK(e.always_survivor == 1.0);
  CHECK(e.protected_survivor == 0.0);
  CHECK(e.never_survivor == 0.0);
}

TEST_CASE("probabilities sum to one everywhere") {
  auto rng = seeded_stream(5, 0);
  for (int i = 0; i < 1000; ++i) {
    StrataParams p;
    p.beta1 = Vector(3);
    p.beta2 = Vector(3);
    for (int j = 0; j < 3; ++j) {
      p.beta1(j) = 6.0 * rng.normal();
      p.beta2(j) = 6.0 * rng.normal();
    }
    const double c[] = {3.0 * rng.normal()};
    const double a = 3.0 * rng.normal();
    CHECK(strata_probs(p, a, c).sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (int z : {0, 1}) CHECK(membership_given_survival(p, a, c, z).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("membership among survivors") {
  const double c0[] = {0.0};
  const auto control = membership_given_survival(truth(), 1.3, c0, 0);
  CHECK(control.always_survivor == 1.0);
  CHECK(control.protected_survivor == 0.0);

  const auto treated = membership_given_survival(truth(), 0.0, c0, 1);
  CHECK(std::abs(treated.always_survivor - 0.6106392339492219883) < 1e-12);
  CHECK(treated.never_survivor == 0.0);

  StrataParams half = truth();
  half.beta2 = Vector::Zero(3);
  const auto even = membership_given_survival(half, 0.4, c0, 1);
  CHECK(even.always_survivor == doctest::Approx(0.5));
  CHECK(even.protected_survivor == doctest::Approx(0.5));
}

TEST_CASE("population always-survivor share equals control survival") {
  const auto ds = testing::base_sample(400000, 21);
  double alive0 = 0.0, n0 = 0.0;
  for (const auto& r : ds) {
    if (r.z == 0) {
      n0 += 1.0;
      alive0 += r.s;
    }
  }
  const auto p = truth();
  const double share = testing::normal_expectation([&](double a, double c) {
    const double cc[] = {c};
    return strata_probs(p, a, cc).always_survivor;
  });
  CHECK(std::abs(share - alive0 / n0) < 0.01);
}

TEST_CASE("joint likelihood recovers generating coefficients") {
  const auto fit = fit_strata(testing::base_sample(100000, 31));
  const auto t = truth();
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(fit.params.beta1(j) - t.beta1(j)) < 0.1);
    CHECK(std::abs(fit.params.beta2(j) - t.beta2(j)) < 0.1);
  }
}

TEST_CASE("analytic score matches finite differences") {
  const auto data = prepare(testing::base_sample(3000, 41));
  auto rng = seeded_stream(41, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Vector theta(6);
    for (int j = 0; j < 6; ++j) theta(j) = rng.normal();
    const Vector analytic = strata_score(data, theta);
    const Vector numeric =
        numerical_gradient([&](const Vector& t) { return strata_loglik(data, t); }, theta, 1e-6);
    CHECK((analytic - numeric).norm() / std::max(1.0, analytic.norm()) <= 1e-5);

    const Matrix h = strata_hessian(data, theta);
    const Matrix hn = numerical_jacobian([&](const Vector& t) { return strata_score(data, t); }, theta, 1e-6);
    CHECK((h - hn).norm() / std::max(1.0, h.norm()) <= 1e-5);
  }
}

TEST_CASE("single-arm data is degenerate") {
  const auto full = prepare(testing::base_sample(2000, 71));
  const ModelData treated_only = reweighted(full, full.z);
  try {
    fit_strata(treated_only);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateLikelihood);
  }
}

TEST_CASE("zero covariates give arm-wise intercepts") {
  const auto fit = fit_strata(survival_counts(400, 300, 300, 150));
  CHECK(fit.params.beta1(0) == doctest::Approx(std::log(0.75 / 0.25)).epsilon(1e-6));
  CHECK(testing::ref_expit(fit.params.beta2(0)) == doctest::Approx(0.5 / 0.75).epsilon(1e-6));
}

TEST_CASE("monotonicity diagnostic") {
  CHECK_FALSE(monotonicity_diagnostic(survival_counts(1000, 708, 1000, 556)).flagged);
  CHECK(monotonicity_diagnostic(survival_counts(1000, 400, 1000, 600)).flagged);
  const auto base = monotonicity_diagnostic(testing::base_sample(100000, 51));
  CHECK_FALSE(base.flagged);
  CHECK(base.rate[1] > base.rate[0]);
}

TEST_CASE("relevance diagnostic") {
  const auto ds = testing::base_sample(5000, 61);
  StrataParams no_a = truth();
  no_a.beta2(1) = 0.0;
  const auto flat = relevance_diagnostic(no_a, ds);
  CHECK(flat.statistic == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(flat.warning);

  const auto fitted = relevance_diagnostic(fit_strata(ds).params, ds);
  CHECK(fitted.statistic > 0.001);
  CHECK_FALSE(fitted.warning);

  std::vector<ObservationRecord> rows(ds.begin(), ds.end());
  for (auto& r : rows) r.a = 0.7;
  CHECK(relevance_diagnostic(truth(), Dataset(rows, ds.covariate_names())).warning);
}
