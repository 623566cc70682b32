#include "sace/missingness_model.hpp"

#include <cmath>
#include <limits>

#include "sace/error.hpp"

namespace sace {

namespace {

int always_responding(const MissingnessParams& params) {
  return params.alpha(params.alpha.size() - 1) > 0.0 ? 1 : 0;
}

}  // namespace

double propensity(const MissingnessParams& params, int z, double a, std::span<const double> c,
                  int y) {
  if (params.always_observed) return 1.0;
  const auto k = static_cast<Eigen::Index>(c.size());
  if (params.alpha.size() != k + 3) {
    throw Error(ErrorKind::InvalidInput, "missingness coefficients do not match (1, A, C, Y)");
  }
  if (params.saturated && y == always_responding(params)) return 1.0;
  double v = params.alpha(0) + params.eta * z + params.alpha(1) * a;
  if (!params.saturated) v += params.alpha(k + 2) * y;
  for (Eigen::Index j = 0; j < k; ++j) v += params.alpha(2 + j) * c[static_cast<std::size_t>(j)];
  return expit(v);
}

AuxiliaryFunction default_missingness_aux(Eigen::Index k) {
  return {k + 3, [k](const AuxContext& ctx, Eigen::Ref<Vector> out) {
            out(0) = 1.0;
            out(1) = ctx.a;
            for (Eigen::Index j = 0; j < k; ++j) out(2 + j) = ctx.c[static_cast<std::size_t>(j)];
            out(k + 2) = ctx.z;
          }};
}

AuxiliaryFunction default_treated_aux(Eigen::Index k) {
  return {2 * (k + 1), [k](const AuxContext& ctx, Eigen::Ref<Vector> out) {
            const double pa = ctx.membership_always;
            const double pb = 1.0 - pa;
            out(0) = pa;
            out(k + 1) = pb;
            for (Eigen::Index j = 0; j < k; ++j) {
              const double cj = ctx.c[static_cast<std::size_t>(j)];
              out(1 + j) = pa * cj;
              out(k + 2 + j) = pb * cj;
            }
          }};
}

AuxiliaryFunction default_control_aux(Eigen::Index k) {
  return {k + 2, [k](const AuxContext& ctx, Eigen::Ref<Vector> out) {
            out(0) = 1.0;
            out(1) = ctx.a;
            for (Eigen::Index j = 0; j < k; ++j) out(2 + j) = ctx.c[static_cast<std::size_t>(j)];
          }};
}

Matrix aux_matrix(const AuxiliaryFunction& h, const ModelData& data,
                  const Eigen::ArrayXd* membership) {
  if (!h.fill || h.dimension < 1) throw Error(ErrorKind::InvalidInput, "auxiliary function undefined");
  const Eigen::Index n = data.n();
  const Eigen::Index k = data.k();
  Matrix out(n, h.dimension);
  Vector row(h.dimension);
  std::vector<double> c(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) c[static_cast<std::size_t>(j)] = data.xc(i, 1 + j);
    AuxContext ctx{static_cast<int>(data.z(i)), data.a(i), c,
                   membership ? (*membership)(i) : 1.0};
    h.fill(ctx, row);
    out.row(i) = row.transpose();
  }
  return out;
}

namespace {

struct Problem {
  Matrix design;         // (1, A, C, Y) over observed survivors
  Matrix h_observed;     // h1 over observed survivors
  Eigen::ArrayXd w_observed;
  Eigen::ArrayXd offset;  // eta * z over observed survivors
  Vector missing_sum;    // sum of w * h1 over survivors with R = 0
  double total = 0.0;
  Eigen::Index dim = 0;

  // (1 - m1) / m1 per observed row. With alpha_y = +-inf the rows whose
  // outcome always responds vanish.
  Eigen::ArrayXd odds_inverse(const Vector& alpha) const {
    const Eigen::Index p = design.cols();
    if (std::isinf(alpha(p - 1))) {
      const double sure = alpha(p - 1) > 0.0 ? 1.0 : 0.0;
      const Eigen::ArrayXd lin = (design.leftCols(p - 1) * alpha.head(p - 1)).array() + offset;
      return (design.col(p - 1).array() == sure).select(0.0, (-lin).exp());
    }
    return (-((design * alpha).array() + offset)).exp();
  }
  Vector moments(const Vector& alpha) const {
    const Eigen::ArrayXd e = odds_inverse(alpha) * w_observed;
    return (h_observed.transpose() * e.matrix() - missing_sum) / total;
  }
  Matrix jacobian(const Vector& alpha) const {
    const Eigen::ArrayXd e = odds_inverse(alpha) * w_observed;
    return -(h_observed.transpose() * (design.array().colwise() * e).matrix()) / total;
  }
};

Problem build_problem(const ModelData& data, double eta, const AuxiliaryFunction& h1) {
  const Matrix h = aux_matrix(h1, data);
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.x.cols() + 1;
  Problem pr;
  pr.dim = p;
  pr.total = data.total_weight();
  pr.missing_sum = Vector::Zero(h1.dimension);

  std::vector<Eigen::Index> observed;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.s(i) != 1.0 || data.weight(i) == 0.0) continue;
    if (data.r(i) == 1.0) {
      observed.push_back(i);
    } else {
      pr.missing_sum += data.weight(i) * h.row(i).transpose();
    }
  }
  const auto m = static_cast<Eigen::Index>(observed.size());
  pr.design.resize(m, p);
  pr.h_observed.resize(m, h1.dimension);
  pr.w_observed.resize(m);
  pr.offset.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index i = observed[static_cast<std::size_t>(j)];
    pr.design.row(j).head(p - 1) = data.x.row(i);
    pr.design(j, p - 1) = data.y(i);
    pr.h_observed.row(j) = h.row(i);
    pr.w_observed(j) = data.weight(i);
    pr.offset(j) = eta * data.z(i);
  }
  return pr;
}

// alpha_y = +-inf: solve all but the last equation for the remaining
// coefficients and accept the end where the last moment keeps the sign it has
// along the whole profile.
bool boundary_fit(const Problem& pr, const SolverConfig& cfg, MissingnessFit& fit, double inf) {
  const Eigen::Index p = pr.dim;
  auto full = [&](const Vector& head) {
    Vector alpha(p);
    alpha << head, inf;
    return alpha;
  };
  MomentSystem reduced;
  reduced.dimension = p - 1;
  reduced.moments = [&](const Vector& head) -> Vector { return pr.moments(full(head)).head(p - 1); };
  reduced.jacobian = [&](const Vector& head) -> Matrix {
    return pr.jacobian(full(head)).topLeftCorner(p - 1, p - 1);
  };
  try {
    const auto res = solve_moments(reduced, Vector::Zero(p - 1), cfg);
    const Vector g = pr.moments(full(res.theta));
    if (!(inf > 0.0 ? g(p - 1) > 0.0 : g(p - 1) < 0.0)) return false;
    fit.params.alpha = full(res.theta);
    fit.params.saturated = true;
    fit.residual_norm = g.cwiseAbs().maxCoeff();
    fit.iterations = res.iterations;
    fit.used_ridge = res.used_ridge;
    return true;
  } catch (const Error&) {
    return false;
  }
}

bool any_missing_survivor(const ModelData& data) {
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.s(i) == 1.0 && data.r(i) == 0.0 && data.weight(i) > 0.0) return true;
  }
  return false;
}

}  // namespace

Vector missingness_moments(const ModelData& data, const Vector& alpha, double eta,
                           const AuxiliaryFunction* h1) {
  const auto fallback = default_missingness_aux(data.k());
  return build_problem(data, eta, h1 ? *h1 : fallback).moments(alpha);
}

MissingnessFit fit_missingness(const ModelData& data, double eta, const AuxiliaryFunction* h1,
                               const SolverConfig& cfg, const Vector* init, bool allow_boundary) {
  if (!std::isfinite(eta)) throw Error(ErrorKind::InvalidInput, "eta must be finite");
  const Eigen::Index p = data.x.cols() + 1;
  MissingnessFit fit;
  fit.params.eta = eta;
  fit.params.alpha = Vector::Zero(p);

  if (!any_missing_survivor(data)) {
    fit.params.always_observed = true;
    return fit;
  }

  const auto fallback = default_missingness_aux(data.k());
  const AuxiliaryFunction& h = h1 ? *h1 : fallback;
  if (h.dimension != p) {
    throw Error(ErrorKind::InvalidInput, "auxiliary dimension " + std::to_string(h.dimension) +
                                             " differs from coefficient count " + std::to_string(p));
  }
  const Problem pr = build_problem(data, eta, h);
  if (pr.w_observed.size() == 0) {
    throw Error(ErrorKind::InvalidInput, "no survivor has an observed outcome");
  }

  MomentSystem system;
  system.dimension = p;
  system.moments = [&](const Vector& alpha) { return pr.moments(alpha); };
  system.jacobian = [&](const Vector& alpha) { return pr.jacobian(alpha); };
  const bool warm = init && init->size() == p && init->allFinite();
  try {
    const auto res = solve_moments(system, warm ? *init : fit.params.alpha, cfg);
    fit.params.alpha = res.theta;
    fit.residual_norm = res.residual_norm;
    fit.iterations = res.iterations;
    fit.used_ridge = res.used_ridge;
    return fit;
  } catch (const Error& err) {
    if (!allow_boundary) throw;
    if (err.kind() != ErrorKind::NonConvergence && err.kind() != ErrorKind::SingularJacobian) throw;
    const double inf = std::numeric_limits<double>::infinity();
    if (!boundary_fit(pr, cfg, fit, inf) && !boundary_fit(pr, cfg, fit, -inf)) throw;
    return fit;
  }
}

Eigen::ArrayXd inverse_propensity(const MissingnessParams& params, const ModelData& data) {
  const Eigen::Index n = data.n();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n);
  const Eigen::Index p = data.x.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.s(i) != 1.0 || data.r(i) != 1.0) continue;
    if (params.always_observed ||
        (params.saturated && data.y(i) == static_cast<double>(always_responding(params)))) {
      out(i) = 1.0;
      continue;
    }
    if (params.saturated) {
      out(i) = 1.0 + std::exp(-(data.x.row(i).dot(params.alpha.head(p)) + params.eta * data.z(i)));
      continue;
    }
    const double lin = data.x.row(i).dot(params.alpha.head(p)) + params.alpha(p) * data.y(i) +
                       params.eta * data.z(i);
    out(i) = 1.0 + std::exp(-lin);
  }
  return out;
}

}  // namespace sace
