#pragma once

#include <functional>
#include <span>

#include "sace/model_data.hpp"
#include "sace/numerics.hpp"

namespace sace {

// Survivor response propensity
//   m1 = expit(alpha0 + eta*z + alpha_a*a + alpha_c'c + alpha_y*y).
// `eta` is a fixed sensitivity offset and is never estimated.
struct MissingnessParams {
  Vector alpha;  // (alpha0, alpha_a, alpha_c..., alpha_y)
  double eta = 0.0;
  bool always_observed = false;  // m1 == 1 sentinel
  // Boundary fit with alpha_y = +inf (outcomes equal to 1 always respond) or
  // -inf (outcomes equal to 0 always respond). In the -inf case alpha0 holds
  // the intercept that applies to y = 1.
  bool saturated = false;
};

double propensity(const MissingnessParams& params, int z, double a, std::span<const double> c,
                  int y);

// Row quantities an auxiliary function may depend on.
struct AuxContext {
  int z = 0;
  double a = 0.0;
  std::span<const double> c;
  double membership_always = 1.0;  // pr(always survivor | Z=z, S=1, A, C)
};

struct AuxiliaryFunction {
  Eigen::Index dimension = 0;
  std::function<void(const AuxContext&, Eigen::Ref<Vector>)> fill;
};

// (1, A, C, Z) for the missingness equation.
AuxiliaryFunction default_missingness_aux(Eigen::Index k);
// Membership-weighted (1, C) blocks for the treated outcome mixture.
AuxiliaryFunction default_treated_aux(Eigen::Index k);
// (1, A, C) for the control outcome equation.
AuxiliaryFunction default_control_aux(Eigen::Index k);

// n x dim matrix of h(row) values.
Matrix aux_matrix(const AuxiliaryFunction& h, const ModelData& data,
                  const Eigen::ArrayXd* membership = nullptr);

struct MissingnessFit {
  MissingnessParams params;
  double residual_norm = 0.0;  // all equations; nonzero on a boundary fit
  int iterations = 0;
  bool used_ridge = false;
};

// Solves the weighted response moment equation. Returns the m1 == 1 sentinel
// when every survivor has an observed outcome.
//
// The equation can lack a finite root in small samples or under a large
// offset. Profiling the other coefficients out, the Z moment falls as alpha_y
// grows and has finite limits at both ends, so without a root the residual is
// smallest at alpha_y = +inf (Z moment still positive) or -inf (already
// negative). With `allow_boundary` that limit is returned, flagged
// `saturated`, with the remaining coefficients solving the other equations;
// otherwise the solver error propagates.
MissingnessFit fit_missingness(const ModelData& data, double eta = 0.0,
                               const AuxiliaryFunction* h1 = nullptr,
                               const SolverConfig& cfg = moment_solver_defaults(),
                               const Vector* init = nullptr, bool allow_boundary = true);

// Sample moments at `alpha`, used for residual checks.
Vector missingness_moments(const ModelData& data, const Vector& alpha, double eta,
                           const AuxiliaryFunction* h1 = nullptr);

// Per-row inverse propensity for observed survivors, 0 elsewhere.
Eigen::ArrayXd inverse_propensity(const MissingnessParams& params, const ModelData& data);

}  // namespace sace
