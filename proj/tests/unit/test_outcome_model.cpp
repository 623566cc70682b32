#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sace/error.hpp"
#include "sace/outcome_model.hpp"

using namespace sace;
using testing::rec;

namespace {

OutcomeParams base_params() {
  OutcomeParams p;
  p.treated_always = Vector(2);
  p.treated_always << 0.9, 0.3;
  p.treated_protected = Vector(2);
  *p.treated_protected << 0.5, 0.4;
  p.control_always = Vector(3);
  p.control_always << -0.5, 0.0, 0.3;
  return p;
}

SolverConfig tight() {
  SolverConfig cfg = likelihood_solver_defaults();
  cfg.tol = 1e-12;
  return cfg;
}

MissingnessParams observed_all(const ModelData& data) {
  MissingnessParams m;
  m.alpha = Vector::Zero(data.x.cols() + 1);
  m.always_observed = true;
  return m;
}

// Base design with membership among treated survivors fixed at expit(0.45),
// so neither A nor C moves it.
Dataset constant_membership(std::size_t n, std::uint64_t seed) {
  auto rng = seeded_stream(seed, 0);
  std::vector<ObservationRecord> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal();
    const double c = rng.normal();
    const int z = rng.uniform() < 0.6 ? 1 : 0;
    const double s1 = testing::ref_expit(0.55 + 0.25 * a + c);
    const double s01 = testing::ref_expit(0.45);
    const double u = rng.uniform();
    const int g = u < s1 * s01 ? 0 : (u < s1 ? 1 : 2);
    const bool alive = (z == 1 && g != 2) || (z == 0 && g == 0);
    if (!alive) {
      rows.push_back(rec(z, 0, 0, std::nullopt, a, {c}));
      continue;
    }
    const double p = z == 1 ? (g == 0 ? testing::ref_expit(0.9 + 0.3 * c) : testing::ref_expit(0.5 + 0.4 * c))
                            : testing::ref_expit(-0.5 + 0.3 * c);
    const int y = rng.uniform() < p ? 1 : 0;
    const bool seen = rng.uniform() < testing::ref_expit(1.5 + 0.5 * a + 1.1 * y);
    rows.push_back(seen ? rec(z, 1, 1, y, a, {c}) : rec(z, 1, 0, std::nullopt, a, {c}));
  }
  return Dataset(rows, {"c1"});
}

}  // namespace

TEST_CASE("stratum outcome probabilities") {
  const double c0[] = {0.0};
  const auto p = base_params();
  CHECK(std::abs(mu(p, Stratum::AlwaysSurvivor, 1, 0.0, c0) - 0.71094950262500396346) < 1e-12);
  CHECK_THROWS_AS(mu(p, Stratum::Protected, 0, 0.0, c0), Error);
  CHECK_THROWS_AS(mu(p, Stratum::NeverSurvivor, 1, 0.0, c0), Error);
  OutcomeParams zero;
  zero.treated_always = Vector::Zero(2);
  zero.treated_protected = Vector::Zero(2);
  zero.control_always = Vector::Zero(3);
  for (auto [g, z] : {std::pair{Stratum::AlwaysSurvivor, 1}, {Stratum::Protected, 1}, {Stratum::AlwaysSurvivor, 0}}) {
    CHECK(mu(zero, g, z, 1.7, c0) == 0.5);
  }
  try {
    mu(p, Stratum::Protected, 0, 0.0, c0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedStratumArm);
  }
}

TEST_CASE("outcome fits recover generating coefficients") {
  const auto data = prepare(testing::base_sample(100000, 91));
  const auto strata = fit_strata(data);
  const auto miss = fit_missingness(data);
  const auto treated = fit_treated_outcomes(data, miss.params, strata.params);
  REQUIRE(treated.treated_protected);
  CHECK(std::abs(treated.treated_always(0) - 0.9) < 0.15);
  CHECK(std::abs(treated.treated_always(1) - 0.3) < 0.15);
  CHECK(std::abs((*treated.treated_protected)(0) - 0.5) < 0.15);
  CHECK(std::abs((*treated.treated_protected)(1) - 0.4) < 0.15);
  Vector gamma(4);
  gamma << treated.treated_always, *treated.treated_protected;
  CHECK(treated_outcome_moments(data, miss.params, strata.params, gamma).cwiseAbs().maxCoeff() <= 1e-8);

  const auto control = fit_control_outcome(data, miss.params);
  const double expect[] = {-0.5, 0.0, 0.3};
  for (int j = 0; j < 3; ++j) CHECK(std::abs(control.control_always(j) - expect[j]) < 0.15);
  CHECK(control_outcome_moments(data, miss.params, control.control_always).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("single stratum collapses to a weighted logistic fit") {
  const auto data = prepare(testing::base_sample(3000, 92));
  StrataParams strata;
  strata.beta1 = Vector::Zero(3);
  strata.beta2 = Vector::Zero(3);
  strata.beta2(0) = 800.0;
  const auto m = observed_all(data);
  const auto fit = fit_treated_outcomes(data, m, strata);
  CHECK(fit.collapsed);
  CHECK_FALSE(fit.treated_protected);

  const Eigen::ArrayXd keep = data.weight * data.z * data.s * data.r;
  const auto ref = logistic_regression(data.xc, data.y, keep, tight());
  CHECK((fit.treated_always - ref.theta).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("control fit without missingness is the logistic MLE") {
  auto ds = testing::base_sample(3000, 93);
  std::vector<ObservationRecord> rows(ds.begin(), ds.end());
  for (auto& r : rows) {
    if (r.s == 1 && r.r == 0) {
      r.r = 1;
      r.y = r.z;
    }
  }
  const auto data = prepare(Dataset(rows, ds.covariate_names()));
  const auto fit = fit_control_outcome(data, observed_all(data));
  const Eigen::ArrayXd keep = data.weight * (1.0 - data.z) * data.s;
  const auto ref = logistic_regression(data.x, data.y, keep, tight());
  CHECK((fit.control_always - ref.theta).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("membership without covariate signal leaves the mixture unidentified") {
  const auto data = prepare(constant_membership(10000, 2));
  const auto strata = fit_strata(data);
  const auto miss = fit_missingness(data);
  try {
    fit_treated_outcomes(data, miss.params, strata.params);
    FAIL("expected the mixture fit to fail");
  } catch (const Error& e) {
    CHECK((e.kind() == ErrorKind::NonConvergence || e.kind() == ErrorKind::SingularJacobian));
    CHECK(std::string(e.what()).find("relevance") != std::string::npos);
  }
}
