#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sace/core_data.hpp"
#include "sace/missingness_model.hpp"
#include "sace/model_data.hpp"
#include "sace/outcome_model.hpp"
#include "sace/strata_model.hpp"

namespace sace {

enum class Method { Proposed, Naive, IgnoreMnar };

std::string_view to_string(Method method) noexcept;
// Accepts "proposed", "naive", "ignore-mnar" (or "ignore_mnar").
Method parse_method(std::string_view text);

enum class IntervalKind { Percentile, Normal };

struct EstimatorConfig {
  double eta = 0.0;
  int bootstrap = 0;  // B; 0 skips the interval
  std::uint64_t seed = 20240601;
  IntervalKind interval = IntervalKind::Percentile;
  double level = 0.95;
  unsigned workers = 0;          // bootstrap threads, 0 = hardware
  bool warm_start = true;        // bootstrap refits start from the full-sample fit, cold on failure
  bool diagnostics = false;      // relevance and rank-condition checks
  SolverConfig moment_solver = moment_solver_defaults();
  SolverConfig likelihood_solver = likelihood_solver_defaults();
  std::optional<AuxiliaryFunction> h1, h2, h3;
};

struct ComponentFits {
  StrataFit strata;
  MissingnessFit missingness;
  TreatedFit treated;
  ControlFit control;
};

struct PointFit {
  double delta_hat = 0.0;
  double treated_mean = 0.0;  // always-survivor weighted mean under treatment
  double control_mean = 0.0;
  std::optional<ComponentFits> components;  // empty for the naive method
};

// Always-survivor weighted contrast of the treated (1, C) and control
// (1, A, C) outcome models.
PointFit plug_in(const ModelData& data, const StrataParams& strata, const Vector& treated_always,
                 const Vector& control_always);

// One estimate without any interval. `warm` seeds every solver.
PointFit fit_point(const ModelData& data, Method method, const EstimatorConfig& cfg,
                   const ComponentFits* warm = nullptr);

struct BootstrapResult {
  double low = 0.0;
  double high = 0.0;
  int requested = 0;
  int converged = 0;
  int failed = 0;
  std::vector<double> replicates;  // converged values, by replicate index
};

// Row-resampling bootstrap. Replicate b draws its rows from stream (seed, b);
// failed replicates are dropped and TooFewReplicates is thrown when fewer
// than 80% converge.
BootstrapResult bootstrap_ci(const ModelData& data,
                             const std::function<double(const ModelData&)>& estimator, int B,
                             std::uint64_t seed, IntervalKind kind = IntervalKind::Percentile,
                             double level = 0.95, unsigned workers = 0);

// Type-7 sample quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double prob);

struct RankCondition {
  double treated_rate = 0.0;  // weighted pr(Y=1 | Z=1, S=1)
  double control_rate = 0.0;
  double determinant = 0.0;
  bool warning = false;       // |determinant| < 1e-3
};

RankCondition rank_condition(const ModelData& data, const MissingnessParams& missingness);

struct FitReport {
  Method method = Method::Proposed;
  double delta_hat = 0.0;
  double treated_mean = 0.0;
  double control_mean = 0.0;
  std::optional<double> ci_low, ci_high;
  IntervalKind interval = IntervalKind::Percentile;
  double eta = 0.0;
  int bootstrap = 0;
  int bootstrap_converged = 0;
  int bootstrap_failed = 0;
  std::uint64_t seed = 0;
  std::optional<ComponentFits> components;
  std::optional<MonotonicityReport> monotonicity;
  std::optional<RelevanceReport> relevance;
  std::optional<RankCondition> rank;
  std::vector<std::string> warnings;

  OutcomeParams outcome_params() const;
};

FitReport estimate(const Dataset& dataset, Method method, const EstimatorConfig& cfg = {});
FitReport estimate(const ModelData& data, Method method, const EstimatorConfig& cfg = {},
                   const Dataset* source = nullptr);

FitReport estimate_sace(const Dataset& dataset, const EstimatorConfig& cfg = {});
FitReport naive_estimate(const Dataset& dataset, const EstimatorConfig& cfg = {});
FitReport ignore_mnar_estimate(const Dataset& dataset, const EstimatorConfig& cfg = {});

struct SensitivityPoint {
  double eta = 0.0;
  std::optional<FitReport> report;
  std::string error;  // set when the fit at this eta failed
};

// Refits the proposed estimator at each offset; every point shares the seed.
std::vector<SensitivityPoint> sensitivity_curve(const Dataset& dataset,
                                                const std::vector<double>& eta_grid,
                                                const EstimatorConfig& cfg = {});

}  // namespace sace
