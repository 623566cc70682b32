#include "sace/outcome_model.hpp"

#include <cmath>

#include "sace/error.hpp"

namespace sace {

namespace {

double dot_with(const Vector& gamma, std::span<const double> head, std::span<const double> c) {
  const auto expected = static_cast<Eigen::Index>(head.size() + c.size());
  if (gamma.size() != expected) {
    throw Error(ErrorKind::InvalidInput, "outcome coefficient length does not match covariates");
  }
  double v = 0.0;
  Eigen::Index j = 0;
  for (double h : head) v += gamma(j++) * h;
  for (double x : c) v += gamma(j++) * x;
  return v;
}

// Observed rows of one arm's survivors, with inverse-propensity weights.
struct ArmRows {
  std::vector<Eigen::Index> index;
  Eigen::ArrayXd v;  // frequency weight / m1
  Eigen::ArrayXd y;
};

ArmRows arm_rows(const ModelData& data, const MissingnessParams& missingness, int z) {
  const Eigen::ArrayXd inv = inverse_propensity(missingness, data);
  ArmRows rows;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.z(i) == z && data.s(i) == 1.0 && data.r(i) == 1.0 && data.weight(i) > 0.0) {
      rows.index.push_back(i);
    }
  }
  const auto m = static_cast<Eigen::Index>(rows.index.size());
  rows.v.resize(m);
  rows.y.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index i = rows.index[static_cast<std::size_t>(j)];
    rows.v(j) = data.weight(i) * inv(i);
    rows.y(j) = data.y(i);
  }
  return rows;
}

Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), m.cols());
  for (std::size_t j = 0; j < index.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = m.row(index[j]);
  return out;
}

Eigen::ArrayXd expit_array(const Eigen::ArrayXd& eta) {
  return eta.unaryExpr([](double v) { return expit(v); });
}

Vector complete_case_start(const Matrix& x, const Eigen::ArrayXd& y, const Eigen::ArrayXd& v) {
  try {
    return logistic_regression(x, y, v).theta;
  } catch (const Error&) {
    return Vector::Zero(x.cols());
  }
}

struct TreatedProblem {
  Matrix xc;              // (1, C) of observed treated survivors
  Matrix h;               // h2 rows
  Eigen::ArrayXd v, y, pi;
  double total = 0.0;
  Eigen::Index q = 0;     // length of one stratum's coefficient vector
  bool collapsed = false;

  Eigen::ArrayXd residual(const Vector& gamma) const {
    const Eigen::ArrayXd mu_a = expit_array((xc * gamma.head(q)).array());
    if (collapsed) return y - mu_a;
    const Eigen::ArrayXd mu_b = expit_array((xc * gamma.tail(q)).array());
    return y - pi * mu_a - (1.0 - pi) * mu_b;
  }
  Vector moments(const Vector& gamma) const {
    return h.transpose() * (v * residual(gamma)).matrix() / total;
  }
  Matrix jacobian(const Vector& gamma) const {
    const Eigen::ArrayXd mu_a = expit_array((xc * gamma.head(q)).array());
    Matrix jac(h.cols(), gamma.size());
    if (collapsed) {
      const Eigen::ArrayXd da = v * mu_a * (1.0 - mu_a);
      jac = -(h.transpose() * (xc.array().colwise() * da).matrix()) / total;
      return jac;
    }
    const Eigen::ArrayXd mu_b = expit_array((xc * gamma.tail(q)).array());
    const Eigen::ArrayXd da = v * pi * mu_a * (1.0 - mu_a);
    const Eigen::ArrayXd db = v * (1.0 - pi) * mu_b * (1.0 - mu_b);
    jac.leftCols(q) = -(h.transpose() * (xc.array().colwise() * da).matrix()) / total;
    jac.rightCols(q) = -(h.transpose() * (xc.array().colwise() * db).matrix()) / total;
    return jac;
  }
};

TreatedProblem treated_problem(const ModelData& data, const MissingnessParams& missingness,
                               const StrataParams& strata, const AuxiliaryFunction* h2) {
  const ArmRows rows = arm_rows(data, missingness, 1);
  if (rows.index.empty()) {
    throw Error(ErrorKind::InvalidInput, "no treated survivor has an observed outcome");
  }
  const Eigen::ArrayXd s01 = expit_array((data.x * strata.beta2).array());
  const auto fallback = default_treated_aux(data.k());
  const AuxiliaryFunction& h = h2 ? *h2 : fallback;

  TreatedProblem pr;
  pr.q = data.xc.cols();
  pr.total = data.total_weight();
  pr.xc = gather(data.xc, rows.index);
  pr.h = gather(aux_matrix(h, data, &s01), rows.index);
  pr.v = rows.v;
  pr.y = rows.y;
  pr.pi.resize(pr.v.size());
  for (std::size_t j = 0; j < rows.index.size(); ++j) pr.pi(static_cast<Eigen::Index>(j)) = s01(rows.index[j]);
  pr.collapsed = (1.0 - pr.pi).maxCoeff() < kCollapseThreshold;
  if (pr.collapsed) {
    pr.h = pr.h.leftCols(pr.q).eval();
  } else if (h.dimension != 2 * pr.q) {
    throw Error(ErrorKind::InvalidInput, "treated auxiliary dimension must equal 2 (1 + k)");
  }
  return pr;
}

}  // namespace

double mu(const OutcomeParams& params, Stratum stratum, int z, double a,
          std::span<const double> c) {
  const double one = 1.0;
  if (z == 1 && stratum == Stratum::AlwaysSurvivor) {
    return expit(dot_with(params.treated_always, {&one, 1}, c));
  }
  if (z == 1 && stratum == Stratum::Protected) {
    if (!params.treated_protected) {
      throw Error(ErrorKind::UnsupportedStratumArm,
                  "protected-stratum model undefined after single-stratum collapse");
    }
    return expit(dot_with(*params.treated_protected, {&one, 1}, c));
  }
  if (z == 0 && stratum == Stratum::AlwaysSurvivor) {
    const double head[2] = {1.0, a};
    return expit(dot_with(params.control_always, head, c));
  }
  throw Error(ErrorKind::UnsupportedStratumArm, "no outcome model for stratum " +
                                                    std::string(to_string(stratum)) +
                                                    " under z=" + std::to_string(z));
}

Vector treated_outcome_moments(const ModelData& data, const MissingnessParams& missingness,
                               const StrataParams& strata, const Vector& gamma,
                               const AuxiliaryFunction* h2) {
  return treated_problem(data, missingness, strata, h2).moments(gamma);
}

TreatedFit fit_treated_outcomes(const ModelData& data, const MissingnessParams& missingness,
                                const StrataParams& strata, const AuxiliaryFunction* h2,
                                const SolverConfig& cfg, const TreatedFit* init) {
  const TreatedProblem pr = treated_problem(data, missingness, strata, h2);
  const Eigen::Index dim = pr.collapsed ? pr.q : 2 * pr.q;

  Vector start(dim);
  if (init && init->treated_protected && !pr.collapsed) {
    start << init->treated_always, *init->treated_protected;
  } else if (init && pr.collapsed) {
    start = init->treated_always;
  } else {
    const Vector cc = complete_case_start(pr.xc, pr.y, pr.v);
    start.head(pr.q) = cc;
    if (!pr.collapsed) start.tail(pr.q) = cc;
  }

  MomentSystem system;
  system.dimension = dim;
  system.moments = [&](const Vector& g) { return pr.moments(g); };
  system.jacobian = [&](const Vector& g) { return pr.jacobian(g); };

  SolveResult res;
  try {
    res = solve_moments(system, start, cfg);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::SingularJacobian && err.kind() != ErrorKind::NonConvergence) throw;
    throw Error(err.kind(), err.detail() +
                                "; the stratum mixture may be unidentified when A carries no "
                                "information about membership (see the relevance diagnostic)");
  }

  TreatedFit fit;
  fit.collapsed = pr.collapsed;
  fit.treated_always = res.theta.head(pr.q);
  if (!pr.collapsed) fit.treated_protected = res.theta.tail(pr.q);
  fit.residual_norm = res.residual_norm;
  fit.iterations = res.iterations;
  return fit;
}

namespace {

struct ControlProblem {
  Matrix x, h;
  Eigen::ArrayXd v, y;
  double total = 0.0;

  Vector moments(const Vector& gamma) const {
    const Eigen::ArrayXd m = expit_array((x * gamma).array());
    return h.transpose() * (v * (y - m)).matrix() / total;
  }
  Matrix jacobian(const Vector& gamma) const {
    const Eigen::ArrayXd m = expit_array((x * gamma).array());
    const Eigen::ArrayXd d = v * m * (1.0 - m);
    return -(h.transpose() * (x.array().colwise() * d).matrix()) / total;
  }
};

ControlProblem control_problem(const ModelData& data, const MissingnessParams& missingness,
                               const AuxiliaryFunction* h3) {
  const ArmRows rows = arm_rows(data, missingness, 0);
  if (rows.index.empty()) {
    throw Error(ErrorKind::InvalidInput, "no control survivor has an observed outcome");
  }
  const auto fallback = default_control_aux(data.k());
  const AuxiliaryFunction& h = h3 ? *h3 : fallback;
  if (h.dimension != data.x.cols()) {
    throw Error(ErrorKind::InvalidInput, "control auxiliary dimension must equal 2 + k");
  }
  ControlProblem pr;
  pr.x = gather(data.x, rows.index);
  pr.h = h3 ? gather(aux_matrix(h, data), rows.index) : pr.x;
  pr.v = rows.v;
  pr.y = rows.y;
  pr.total = data.total_weight();
  return pr;
}

}  // namespace

Vector control_outcome_moments(const ModelData& data, const MissingnessParams& missingness,
                               const Vector& gamma, const AuxiliaryFunction* h3) {
  return control_problem(data, missingness, h3).moments(gamma);
}

ControlFit fit_control_outcome(const ModelData& data, const MissingnessParams& missingness,
                               const AuxiliaryFunction* h3, const SolverConfig& cfg,
                               const Vector* init) {
  const ControlProblem pr = control_problem(data, missingness, h3);
  const Vector start = init ? *init : complete_case_start(pr.x, pr.y, pr.v);

  MomentSystem system;
  system.dimension = pr.x.cols();
  system.moments = [&](const Vector& g) { return pr.moments(g); };
  system.jacobian = [&](const Vector& g) { return pr.jacobian(g); };
  const auto res = solve_moments(system, start, cfg);
  return {res.theta, res.residual_norm, res.iterations};
}

}  // namespace sace
