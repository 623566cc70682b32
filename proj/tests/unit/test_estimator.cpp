#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sace/error.hpp"
#include "sace/estimator.hpp"
#include "sace/simulation.hpp"

using namespace sace;
using testing::rec;

namespace {

// Survivors with observed outcomes only: `pos` of `n` positive in each arm.
Dataset observed_counts(int n1, int pos1, int n0, int pos0) {
  std::vector<ObservationRecord> rows;
  for (int i = 0; i < n1; ++i) rows.push_back(rec(1, 1, 1, i < pos1 ? 1 : 0));
  for (int i = 0; i < n0; ++i) rows.push_back(rec(0, 1, 1, i < pos0 ? 1 : 0));
  rows.push_back(rec(1, 0, 0, std::nullopt));
  rows.push_back(rec(0, 0, 0, std::nullopt));
  return Dataset(rows, {});
}

Dataset fill_missing(const Dataset& ds) {
  std::vector<ObservationRecord> rows(ds.begin(), ds.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].s == 1 && rows[i].r == 0) {
      rows[i].r = 1;
      rows[i].y = static_cast<int>(i % 2);
    }
  }
  return Dataset(rows, ds.covariate_names());
}

EstimatorConfig with_bootstrap(int B, unsigned workers = 1) {
  EstimatorConfig cfg;
  cfg.bootstrap = B;
  cfg.workers = workers;
  return cfg;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("proposed") == Method::Proposed);
  CHECK(parse_method("naive") == Method::Naive);
  CHECK(parse_method("ignore-mnar") == Method::IgnoreMnar);
  CHECK(parse_method("ignore_mnar") == Method::IgnoreMnar);
  CHECK(to_string(Method::IgnoreMnar) == "ignore-mnar");
  CHECK_THROWS_AS(parse_method("bogus"), Error);
}

TEST_CASE("identical outcome models give a zero contrast") {
  const auto data = prepare(testing::base_sample(2000, 101));
  const auto strata = fit_strata(data).params;
  Vector treated(2), control(3);
  treated << 0.4, -0.7;
  control << 0.4, 0.0, -0.7;
  const auto p = plug_in(data, strata, treated, control);
  CHECK(p.delta_hat == 0.0);
  CHECK(p.treated_mean == p.control_mean);
}

TEST_CASE("naive contrast of observed means") {
  const auto rep = naive_estimate(observed_counts(100, 55, 100, 44));
  CHECK(rep.delta_hat == doctest::Approx(0.11).epsilon(1e-12));
  CHECK(rep.treated_mean == doctest::Approx(0.55));
  CHECK(rep.control_mean == doctest::Approx(0.44));
  CHECK_FALSE(rep.components);
  CHECK(naive_estimate(observed_counts(80, 20, 40, 10)).delta_hat == 0.0);
}

TEST_CASE("naive needs an observed outcome in each arm") {
  std::vector<ObservationRecord> rows = {rec(1, 1, 1, 1), rec(1, 1, 1, 0), rec(0, 1, 0, std::nullopt),
                                         rec(0, 0, 0, std::nullopt)};
  try {
    naive_estimate(Dataset(rows, {}));
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCell);
  }
}

TEST_CASE("without missing outcomes the two weighted methods agree exactly") {
  for (std::uint64_t seed : {111u, 112u}) {
    const auto ds = fill_missing(testing::base_sample(2000, seed));
    const auto cfg = with_bootstrap(20);
    const auto a = estimate_sace(ds, cfg);
    const auto b = ignore_mnar_estimate(ds, cfg);
    CHECK(a.delta_hat == b.delta_hat);
    CHECK(*a.ci_low == *b.ci_low);
    CHECK(*a.ci_high == *b.ci_high);
  }
}

TEST_CASE("ignoring outcome-dependent missingness biases upward") {
  const auto ds = testing::base_sample(100000, 121);
  const double truth = true_sace(Scenario::base(), 2000000);
  CHECK(ignore_mnar_estimate(ds).delta_hat > truth);
  CHECK(estimate_sace(ds).delta_hat < ignore_mnar_estimate(ds).delta_hat);
}

TEST_CASE("large-sample consistency") {
  const double truth = true_sace(Scenario::base(), 2000000);
  const auto rep = estimate_sace(testing::base_sample(1000000, 131));
  CHECK(std::abs(rep.delta_hat - truth) <= 0.01);
}

TEST_CASE("constant estimator gives a degenerate interval") {
  const auto data = prepare(testing::base_sample(300, 141));
  for (auto kind : {IntervalKind::Percentile, IntervalKind::Normal}) {
    const auto b = bootstrap_ci(data, [](const ModelData&) { return 0.25; }, 50, 9, kind);
    CHECK(b.low == 0.25);
    CHECK(b.high == 0.25);
    CHECK(b.converged == 50);
  }
}

TEST_CASE("bootstrap drops failures and refuses too many") {
  const auto data = prepare(testing::base_sample(300, 142));
  int calls = 0;
  const auto some = bootstrap_ci(
      data,
      [&](const ModelData&) -> double {
        if (++calls % 10 == 0) throw Error(ErrorKind::NonConvergence, "x");
        return 1.0;
      },
      50, 3, IntervalKind::Percentile, 0.95, 1);
  CHECK(some.failed == 5);
  CHECK(some.converged == 45);
  CHECK_THROWS_AS(bootstrap_ci(
                      data, [](const ModelData&) -> double { throw Error(ErrorKind::NonConvergence, "x"); },
                      20, 3, IntervalKind::Percentile, 0.95, 1),
                  Error);
}

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("fixed seed gives identical intervals") {
  const auto ds = testing::base_sample(2000, 151);
  const auto a = estimate_sace(ds, with_bootstrap(30, 1));
  const auto b = estimate_sace(ds, with_bootstrap(30, 1));
  const auto c = estimate_sace(ds, with_bootstrap(30, 3));
  CHECK(a.delta_hat == b.delta_hat);
  CHECK(*a.ci_low == *b.ci_low);
  CHECK(*a.ci_high == *b.ci_high);
  CHECK(*a.ci_low == *c.ci_low);
  CHECK(*a.ci_high == *c.ci_high);
  CHECK(*a.ci_low <= a.delta_hat);
  CHECK(a.delta_hat <= *a.ci_high);

  auto other = with_bootstrap(30, 1);
  other.seed = 7;
  const auto d = estimate_sace(ds, other);
  CHECK((*d.ci_low != *a.ci_low || *d.ci_high != *a.ci_high));
}

TEST_CASE("sensitivity curve at zero offset is the main estimate") {
  const auto ds = testing::base_sample(2000, 161);
  const auto cfg = with_bootstrap(20);
  const auto curve = sensitivity_curve(ds, {-0.5, 0.0, 0.5}, cfg);
  REQUIRE(curve.size() == 3);
  const auto base = estimate_sace(ds, cfg);
  REQUIRE(curve[1].report);
  CHECK(curve[1].report->delta_hat == base.delta_hat);
  CHECK(*curve[1].report->ci_low == *base.ci_low);
  CHECK(*curve[1].report->ci_high == *base.ci_high);
  for (const auto& pt : curve) CHECK(pt.error.empty());
  CHECK(curve[0].report->eta == -0.5);
  CHECK_THROWS_AS(sensitivity_curve(ds, {}), Error);
}

TEST_CASE("diagnostics on the base design") {
  EstimatorConfig cfg;
  cfg.diagnostics = true;
  const auto rep = estimate_sace(testing::base_sample(20000, 171), cfg);
  REQUIRE(rep.monotonicity);
  REQUIRE(rep.relevance);
  REQUIRE(rep.rank);
  CHECK_FALSE(rep.monotonicity->flagged);
  CHECK_FALSE(rep.relevance->warning);
  CHECK(rep.rank->treated_rate > rep.rank->control_rate);
  const auto p = rep.outcome_params();
  CHECK(p.treated_protected);
}
