#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "sace/core_data.hpp"
#include "sace/model_data.hpp"
#include "sace/numerics.hpp"

namespace sace {

// Logistic survival models over (1, A, C):
//   treated survival          s1  = expit(beta1' x)
//   control/treated ratio     s01 = expit(beta2' x)
struct StrataParams {
  Vector beta1;
  Vector beta2;
};

// Stratum proportions at one covariate point. Also used for the
// conditional membership distribution among survivors.
struct StrataProbabilities {
  double always_survivor = 0.0;
  double protected_survivor = 0.0;
  double never_survivor = 0.0;

  double operator[](Stratum g) const noexcept;
  double sum() const noexcept { return always_survivor + protected_survivor + never_survivor; }
};

double survival_treated(const StrataParams& params, double a, std::span<const double> c);
double survival_ratio(const StrataParams& params, double a, std::span<const double> c);
StrataProbabilities strata_probs(const StrataParams& params, double a, std::span<const double> c);

// Stratum distribution given (Z = z, S = 1, A = a, C = c).
StrataProbabilities membership_given_survival(const StrataParams& params, double a,
                                              std::span<const double> c, int z);

struct StrataFit {
  StrataParams params;
  double loglik = 0.0;        // mean over the weighted sample
  double gradient_norm = 0.0;
  int iterations = 0;
};

// Joint maximum likelihood for (beta1, beta2).
StrataFit fit_strata(const ModelData& data, const SolverConfig& cfg = likelihood_solver_defaults(),
                     const StrataParams* init = nullptr);
StrataFit fit_strata(const Dataset& dataset, const SolverConfig& cfg = likelihood_solver_defaults());

// Mean joint log-likelihood and its analytic score, exposed so the score can
// be checked against finite differences.
double strata_loglik(const ModelData& data, const Vector& theta);
Vector strata_score(const ModelData& data, const Vector& theta);
Matrix strata_hessian(const ModelData& data, const Vector& theta);

// Per-row s1 and s01 under `params`.
struct StrataColumns {
  Eigen::ArrayXd s1, s01;
};
StrataColumns strata_columns(const StrataParams& params, const ModelData& data);

struct SurvivalCell {
  std::vector<double> key;  // (A, C1..Ck) values of the cell
  std::array<std::size_t, 2> count{};
  std::array<double, 2> rate{};
  bool flagged = false;
};

struct MonotonicityReport {
  std::array<double, 2> rate{};  // survival rate by arm
  bool flagged = false;          // rate(z=1) < rate(z=0)
  bool discrete = false;         // per-cell rates computed
  std::vector<SurvivalCell> cells;
};

MonotonicityReport monotonicity_diagnostic(const Dataset& dataset);

struct RelevanceReport {
  double statistic = 0.0;
  double threshold = 1e-4;
  bool warning = false;
  std::size_t rows = 0;  // treated survivors used
};

// Variance, over treated survivors, of the gap between the membership
// probability given (A, C) and the same probability with A integrated out.
RelevanceReport relevance_diagnostic(const StrataParams& params, const Dataset& dataset,
                                     double threshold = 1e-4);

}  // namespace sace
