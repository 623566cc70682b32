#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "sace/core_data.hpp"
#include "sace/numerics.hpp"

namespace sace {

// Column-major numeric view of a validated Dataset used by every fitting
// routine. Rows carry frequency weights, so a bootstrap resample is the same
// data with multinomial counts as weights.
struct ModelData {
  Eigen::ArrayXd z, s, r, y;  // y is 0 where absent
  Eigen::ArrayXd a;
  Matrix x;    // (1, A, C) per row
  Matrix xc;   // (1, C) per row
  Eigen::ArrayXd weight;

  Eigen::Index n() const noexcept { return z.size(); }
  Eigen::Index k() const noexcept { return xc.cols() - 1; }
  double total_weight() const { return weight.sum(); }
};

// Throws InvalidInput when the dataset violates any structural rule.
ModelData prepare(const Dataset& dataset);

// Same rows, new frequency weights (length n, nonnegative).
ModelData reweighted(const ModelData& data, Eigen::ArrayXd weight);

// Multinomial resample counts of size n drawn from `stream`.
Eigen::ArrayXd resample_counts(Eigen::Index n, RandomStream& stream);

// Weighted logistic MLE of binary `y` on the columns of `x`.
MaximizeResult logistic_regression(const Matrix& x, const Eigen::ArrayXd& y,
                                   const Eigen::ArrayXd& weight,
                                   const SolverConfig& cfg = likelihood_solver_defaults(),
                                   const Vector* init = nullptr);

}  // namespace sace
