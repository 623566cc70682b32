#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace sace {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Logistic function, evaluated without overflow for any finite x.
double expit(double x) noexcept;
double logit(double p);
// log(expit(x)) without cancellation for large |x|.
double log_expit(double x) noexcept;

struct SolverConfig {
  double tol = 1e-8;         // sup-norm of moments or of the score
  int max_iter = 100;
  double damping = 1.0;      // first trial step fraction, in (0, 1]
  double h_fd = 1e-6;        // scaled by (1 + |theta_j|)
  double param_cap = 50.0;   // any |theta_j| above this aborts the solve
  double max_condition = 1e12;
  bool ridge_fallback = true;
};

// Moment-equation defaults: tol 1e-8.
SolverConfig moment_solver_defaults();
// Likelihood defaults: score tol 1e-6 and the separation cap |theta_j| <= 15.
SolverConfig likelihood_solver_defaults();

// Just-identified system g_n(theta) = 0. The Jacobian is optional; when
// absent it is formed by central differences.
struct MomentSystem {
  Eigen::Index dimension = 0;
  std::function<Vector(const Vector&)> moments;
  std::function<Matrix(const Vector&)> jacobian;
};

struct SolveResult {
  Vector theta;
  double residual_norm = 0.0;  // sup-norm of g_n(theta)
  int iterations = 0;
  bool used_ridge = false;
};

// Damped Newton with step halving on ||g_n||_2. Returns only when
// ||g_n(theta)||_inf <= cfg.tol. Throws NonConvergence or SingularJacobian.
SolveResult solve_moments(const MomentSystem& system, const Vector& init,
                          const SolverConfig& cfg = moment_solver_defaults());

struct LogLikelihood {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;  // optional
  std::function<Matrix(const Vector&)> hessian;   // optional
};

struct MaximizeResult {
  Vector theta;
  double loglik = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // loglik at every accepted iterate
};

// Newton ascent with backtracking. Throws NonConvergence, or
// DegenerateLikelihood when an iterate leaves the cfg.param_cap box.
MaximizeResult maximize_loglik(const LogLikelihood& loglik, const Vector& init,
                               const SolverConfig& cfg = likelihood_solver_defaults());

Vector numerical_gradient(const std::function<double(const Vector&)>& f,
                          const Vector& theta, double h_fd);
Matrix numerical_jacobian(const std::function<Vector(const Vector&)>& g,
                          const Vector& theta, double h_fd);

// Reproducible random stream addressed by (master seed, stream index).
// Streams are value types; copy one to replay it.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_index);

  double uniform();  // [0, 1)
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n);  // uniform on {0, ..., n-1}
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

RandomStream seeded_stream(std::uint64_t master_seed, std::uint64_t stream_index);

// Derives a child seed; used to give every Monte Carlo replicate its own
// bootstrap seed without sharing streams.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream_index);

}  // namespace sace
