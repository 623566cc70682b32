#include "sace/model_data.hpp"

#include <cmath>

#include "sace/error.hpp"

namespace sace {

ModelData prepare(const Dataset& dataset) {
  require_valid(dataset);
  const auto n = static_cast<Eigen::Index>(dataset.n());
  const auto k = static_cast<Eigen::Index>(dataset.k());
  ModelData d;
  d.z.resize(n);
  d.s.resize(n);
  d.r.resize(n);
  d.y.resize(n);
  d.a.resize(n);
  d.x.resize(n, 2 + k);
  d.xc.resize(n, 1 + k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = dataset[static_cast<std::size_t>(i)];
    d.z(i) = rec.z;
    d.s(i) = rec.s;
    d.r(i) = rec.r;
    d.y(i) = rec.y.value_or(0);
    d.a(i) = rec.a;
    d.x(i, 0) = 1.0;
    d.x(i, 1) = rec.a;
    d.xc(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      d.x(i, 2 + j) = rec.c[static_cast<std::size_t>(j)];
      d.xc(i, 1 + j) = rec.c[static_cast<std::size_t>(j)];
    }
  }
  d.weight = Eigen::ArrayXd::Ones(n);
  return d;
}

ModelData reweighted(const ModelData& data, Eigen::ArrayXd weight) {
  if (weight.size() != data.n() || (weight < 0.0).any() || !weight.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "weights must be finite, nonnegative and one per row");
  }
  ModelData out = data;
  out.weight = std::move(weight);
  return out;
}

Eigen::ArrayXd resample_counts(Eigen::Index n, RandomStream& stream) {
  Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    counts(static_cast<Eigen::Index>(stream.index(static_cast<std::size_t>(n)))) += 1.0;
  }
  return counts;
}

MaximizeResult logistic_regression(const Matrix& x, const Eigen::ArrayXd& y,
                                   const Eigen::ArrayXd& weight, const SolverConfig& cfg,
                                   const Vector* init) {
  const double total = weight.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidInput, "logistic fit on zero total weight");

  LogLikelihood ll;
  ll.value = [&](const Vector& beta) {
    const Eigen::ArrayXd eta = (x * beta).array();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      if (weight(i) == 0.0) continue;
      sum += weight(i) * (y(i) * log_expit(eta(i)) + (1.0 - y(i)) * log_expit(-eta(i)));
    }
    return sum / total;
  };
  ll.gradient = [&](const Vector& beta) -> Vector {
    const Eigen::ArrayXd p = (x * beta).array().unaryExpr([](double v) { return expit(v); });
    return x.transpose() * (weight * (y - p)).matrix() / total;
  };
  ll.hessian = [&](const Vector& beta) -> Matrix {
    const Eigen::ArrayXd p = (x * beta).array().unaryExpr([](double v) { return expit(v); });
    const Eigen::ArrayXd h = weight * p * (1.0 - p);
    return -(x.transpose() * (x.array().colwise() * h).matrix()) / total;
  };
  const Vector start = init ? *init : Vector(Vector::Zero(x.cols()));
  return maximize_loglik(ll, start, cfg);
}

}  // namespace sace
