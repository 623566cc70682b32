#include "sace/numerics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sace/error.hpp"

namespace sace {

double expit(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorKind::InvalidInput, "logit argument outside (0,1): " + std::to_string(p));
  }
  return std::log(p) - std::log1p(-p);
}

double log_expit(double x) noexcept {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

SolverConfig moment_solver_defaults() { return SolverConfig{}; }

SolverConfig likelihood_solver_defaults() {
  SolverConfig cfg;
  cfg.tol = 1e-6;
  cfg.param_cap = 15.0;
  return cfg;
}

namespace {

double sup_norm(const Vector& v) {
  if (v.size() == 0) return 0.0;
  if (!v.allFinite()) return std::numeric_limits<double>::infinity();
  return v.cwiseAbs().maxCoeff();
}

double step_size(double h_fd, double theta_j) { return h_fd * (1.0 + std::abs(theta_j)); }

void check_config(const SolverConfig& cfg) {
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1 || !(cfg.damping > 0.0 && cfg.damping <= 1.0) ||
      !(cfg.h_fd > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "solver config requires tol > 0, max_iter >= 1, "
                                         "damping in (0,1] and h_fd > 0");
  }
}

// Reciprocal condition number from singular values; 0 for rank deficiency.
double inverse_condition(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

struct Attempt {
  SolveResult result;
};

SolveResult newton_attempt(const MomentSystem& system, const Vector& init,
                           const SolverConfig& cfg, bool ridge) {
  auto jacobian = [&](const Vector& theta) {
    if (system.jacobian) return system.jacobian(theta);
    return numerical_jacobian(system.moments, theta, cfg.h_fd);
  };

  Vector theta = init;
  Vector g = system.moments(theta);
  double norm = sup_norm(g);
  if (!std::isfinite(norm)) {
    throw Error(ErrorKind::NonConvergence, "moments not finite at the initial value");
  }
  double lambda = 1e-3;

  for (int it = 0; it <= cfg.max_iter; ++it) {
    if (norm <= cfg.tol) return {theta, norm, it, ridge};
    if (it == cfg.max_iter) break;

    const Matrix jac = jacobian(theta);
    Vector step;
    if (!ridge) {
      if (!jac.allFinite() || inverse_condition(jac) < 1.0 / cfg.max_condition) {
        throw Error(ErrorKind::SingularJacobian,
                    "Jacobian near-singular at iteration " + std::to_string(it) +
                        " (moment norm " + std::to_string(norm) + ")");
      }
      step = jac.partialPivLu().solve(-g);
    } else {
      const Matrix jtj = jac.transpose() * jac;
      const double scale = std::max(1e-12, jtj.diagonal().maxCoeff());
      Matrix damped = jtj;
      damped.diagonal().array() += lambda * scale;
      step = damped.ldlt().solve(-jac.transpose() * g);
    }

    const double merit = g.squaredNorm();
    double t = cfg.damping;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const Vector cand = theta + t * step;
      const Vector gc = system.moments(cand);
      if (!gc.allFinite()) continue;
      if (gc.squaredNorm() < (1.0 - 1e-4 * t) * merit) {
        theta = cand;
        g = gc;
        norm = sup_norm(g);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (ridge && lambda < 1e8) {
        lambda *= 10.0;
        continue;
      }
      throw Error(ErrorKind::NonConvergence,
                  "line search failed at iteration " + std::to_string(it) + " (moment norm " +
                      std::to_string(norm) + ")");
    }
    if (ridge) lambda = std::max(lambda * 0.1, 1e-12);
    if (sup_norm(theta) > cfg.param_cap) {
      throw Error(ErrorKind::NonConvergence,
                  "parameters diverged beyond |theta| = " + std::to_string(cfg.param_cap) +
                      " at iteration " + std::to_string(it));
    }
  }
  throw Error(ErrorKind::NonConvergence, "iteration cap " + std::to_string(cfg.max_iter) +
                                             " reached (moment norm " + std::to_string(norm) + ")");
}

}  // namespace

SolveResult solve_moments(const MomentSystem& system, const Vector& init,
                          const SolverConfig& cfg) {
  check_config(cfg);
  if (init.size() != system.dimension || !system.moments) {
    throw Error(ErrorKind::InvalidInput, "moment system and initial value disagree in dimension");
  }
  try {
    return newton_attempt(system, init, cfg, false);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::SingularJacobian || !cfg.ridge_fallback) throw;
    try {
      return newton_attempt(system, init, cfg, true);
    } catch (const Error& retry) {
      throw Error(ErrorKind::SingularJacobian,
                  err.detail() + "; ridge retry failed: " + retry.detail());
    }
  }
}

MaximizeResult maximize_loglik(const LogLikelihood& loglik, const Vector& init,
                               const SolverConfig& cfg) {
  check_config(cfg);
  if (!loglik.value) throw Error(ErrorKind::InvalidInput, "log-likelihood value function required");

  const auto gradient = [&](const Vector& theta) {
    if (loglik.gradient) return loglik.gradient(theta);
    return numerical_gradient(loglik.value, theta, cfg.h_fd);
  };
  const auto hessian = [&](const Vector& theta) -> Matrix {
    if (loglik.hessian) return loglik.hessian(theta);
    // Second differences of the gradient need a coarser step than the gradient itself.
    const double h = loglik.gradient ? cfg.h_fd : std::cbrt(cfg.h_fd) * 1e-2;
    Matrix h_mat = numerical_jacobian(gradient, theta, h);
    return 0.5 * (h_mat + h_mat.transpose());
  };

  MaximizeResult res;
  res.theta = init;
  res.loglik = loglik.value(init);
  if (!std::isfinite(res.loglik)) {
    throw Error(ErrorKind::InvalidInput, "log-likelihood not finite at the initial value");
  }
  res.trace.push_back(res.loglik);

  for (int it = 0; it <= cfg.max_iter; ++it) {
    const Vector grad = gradient(res.theta);
    res.gradient_norm = sup_norm(grad);
    res.iterations = it;
    if (res.gradient_norm <= cfg.tol) return res;
    if (it == cfg.max_iter) break;

    // Ascent direction from the (ridged if needed) negative Hessian.
    Matrix neg = -hessian(res.theta);
    const Eigen::Index p = neg.rows();
    double ridge = 0.0;
    const double scale = std::max(1.0, neg.diagonal().cwiseAbs().maxCoeff());
    Eigen::LLT<Matrix> llt;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Matrix m = neg;
      m.diagonal().array() += ridge;
      llt.compute(m);
      if (llt.info() == Eigen::Success && neg.allFinite()) break;
      ridge = ridge == 0.0 ? 1e-10 * scale : ridge * 10.0;
    }
    Vector step = llt.info() == Eigen::Success ? Vector(llt.solve(grad)) : grad;
    if (!step.allFinite()) step = grad;
    (void)p;

    const double slope = grad.dot(step);
    const double slack = 1e-13 * std::max(1.0, std::abs(res.loglik));
    double t = cfg.damping;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      const Vector cand = res.theta + t * step;
      const double fc = loglik.value(cand);
      if (!std::isfinite(fc)) continue;
      const bool armijo = fc >= res.loglik + 1e-4 * t * slope;
      // Near the optimum the true gain drops below rounding; accept a full
      // step that does not lose more than rounding noise.
      const bool flat = ls == 0 && fc >= res.loglik - slack && fc >= res.loglik;
      if (armijo || flat) {
        res.theta = cand;
        res.loglik = fc;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw Error(ErrorKind::NonConvergence,
                  "no ascent step at iteration " + std::to_string(it) + " (score norm " +
                      std::to_string(res.gradient_norm) + ")");
    }
    res.trace.push_back(res.loglik);
    if (sup_norm(res.theta) > cfg.param_cap) {
      throw Error(ErrorKind::DegenerateLikelihood,
                  "coefficient exceeded |beta| = " + std::to_string(cfg.param_cap) +
                      " (separation or monotone likelihood)");
    }
  }
  throw Error(ErrorKind::NonConvergence, "iteration cap " + std::to_string(cfg.max_iter) +
                                             " reached (score norm " +
                                             std::to_string(res.gradient_norm) + ")");
}

Vector numerical_gradient(const std::function<double(const Vector&)>& f, const Vector& theta,
                          double h_fd) {
  Vector grad(theta.size());
  Vector work = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = step_size(h_fd, theta(j));
    work(j) = theta(j) + h;
    const double up = f(work);
    work(j) = theta(j) - h;
    const double down = f(work);
    work(j) = theta(j);
    grad(j) = (up - down) / (2.0 * h);
  }
  return grad;
}

Matrix numerical_jacobian(const std::function<Vector(const Vector&)>& g, const Vector& theta,
                          double h_fd) {
  Matrix jac;
  Vector work = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = step_size(h_fd, theta(j));
    work(j) = theta(j) + h;
    const Vector up = g(work);
    work(j) = theta(j) - h;
    const Vector down = g(work);
    work(j) = theta(j);
    if (j == 0) jac.resize(up.size(), theta.size());
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t master_seed, std::uint64_t stream_index) {
  const std::uint64_t a = splitmix64(master_seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream_index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(stream_index),
                    static_cast<std::uint32_t>(stream_index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : engine_(make_engine(master_seed, stream_index)) {}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() { return normal_(engine_); }

std::size_t RandomStream::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

RandomStream seeded_stream(std::uint64_t master_seed, std::uint64_t stream_index) {
  return RandomStream(master_seed, stream_index);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream_index) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(~stream_index));
}

}  // namespace sace
