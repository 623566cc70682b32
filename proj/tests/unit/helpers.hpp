#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sace/core_data.hpp"
#include "sace/simulation.hpp"

namespace testing {

inline sace::ObservationRecord rec(int z, int s, int r, std::optional<int> y, double a = 0.0,
                                   std::vector<double> c = {}) {
  sace::ObservationRecord out;
  out.z = z;
  out.s = s;
  out.r = r;
  out.y = y;
  out.a = a;
  out.c = std::move(c);
  return out;
}

inline sace::Dataset base_sample(std::size_t n, std::uint64_t seed,
                                 sace::Scenario scenario = sace::Scenario::base()) {
  sace::DgpSpec spec;
  spec.scenario = scenario;
  spec.n = n;
  spec.seed = seed;
  return sace::generate(spec);
}

// Plain logistic function, kept separate from the library's.
inline double ref_expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Probabilists' Gauss-Hermite rule (weight exp(-x^2/2)/sqrt(2 pi)) from the
// Golub-Welsch eigenproblem.
struct Quadrature {
  Eigen::VectorXd nodes, weights;
};

inline Quadrature gauss_hermite(int m) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  Quadrature q;
  q.nodes = es.eigenvalues();
  q.weights = es.eigenvectors().row(0).array().square().transpose();
  return q;
}

// E f(A, C) for independent standard normal A and C.
template <class F>
double normal_expectation(F f, int m = 80) {
  const auto q = gauss_hermite(m);
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) total += q.weights(i) * q.weights(k) * f(q.nodes(i), q.nodes(k));
  }
  return total;
}

}  // namespace testing
