#pragma once

#include <optional>
#include <span>

#include "sace/core_data.hpp"
#include "sace/missingness_model.hpp"
#include "sace/model_data.hpp"
#include "sace/strata_model.hpp"

namespace sace {

// Stratum-by-arm outcome models on the logistic scale. Treated models use
// (1, C); the control model uses (1, A, C).
struct OutcomeParams {
  Vector treated_always;
  std::optional<Vector> treated_protected;  // empty after a single-stratum collapse
  Vector control_always;
};

// pr(Y = 1 | Z = z, G = stratum, A, C). Throws UnsupportedStratumArm outside
// (1, always), (1, protected) and (0, always).
double mu(const OutcomeParams& params, Stratum stratum, int z, double a,
          std::span<const double> c);

struct TreatedFit {
  Vector treated_always;
  std::optional<Vector> treated_protected;
  double residual_norm = 0.0;
  int iterations = 0;
  bool collapsed = false;
};

// Below this maximum protected-membership probability the mixture is
// treated as single-stratum.
inline constexpr double kCollapseThreshold = 1e-8;

TreatedFit fit_treated_outcomes(const ModelData& data, const MissingnessParams& missingness,
                                const StrataParams& strata, const AuxiliaryFunction* h2 = nullptr,
                                const SolverConfig& cfg = moment_solver_defaults(),
                                const TreatedFit* init = nullptr);

struct ControlFit {
  Vector control_always;
  double residual_norm = 0.0;
  int iterations = 0;
};

ControlFit fit_control_outcome(const ModelData& data, const MissingnessParams& missingness,
                               const AuxiliaryFunction* h3 = nullptr,
                               const SolverConfig& cfg = moment_solver_defaults(),
                               const Vector* init = nullptr);

// Sample moments of the two outcome equations, for residual checks.
Vector treated_outcome_moments(const ModelData& data, const MissingnessParams& missingness,
                               const StrataParams& strata, const Vector& gamma,
                               const AuxiliaryFunction* h2 = nullptr);
Vector control_outcome_moments(const ModelData& data, const MissingnessParams& missingness,
                               const Vector& gamma, const AuxiliaryFunction* h3 = nullptr);

}  // namespace sace
