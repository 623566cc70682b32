#include "sace/strata_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "sace/error.hpp"

namespace sace {

double StrataProbabilities::operator[](Stratum g) const noexcept {
  switch (g) {
    case Stratum::AlwaysSurvivor: return always_survivor;
    case Stratum::Protected: return protected_survivor;
    case Stratum::NeverSurvivor: return never_survivor;
  }
  return 0.0;
}

namespace {

double linear(const Vector& beta, double a, std::span<const double> c) {
  if (beta.size() != static_cast<Eigen::Index>(c.size()) + 2) {
    throw Error(ErrorKind::InvalidInput, "coefficient length does not match (1, A, C)");
  }
  double v = beta(0) + beta(1) * a;
  for (std::size_t j = 0; j < c.size(); ++j) v += beta(2 + static_cast<Eigen::Index>(j)) * c[j];
  return v;
}

Eigen::ArrayXd expit_array(const Eigen::ArrayXd& eta) {
  return eta.unaryExpr([](double v) { return expit(v); });
}

// Quantities shared by the likelihood, score and Hessian at one theta.
struct Evaluation {
  Eigen::ArrayXd eta1, eta2, s1, s01;
};

Evaluation evaluate(const ModelData& data, const Vector& theta) {
  const Eigen::Index p = data.x.cols();
  Evaluation ev;
  ev.eta1 = (data.x * theta.head(p)).array();
  ev.eta2 = (data.x * theta.tail(p)).array();
  ev.s1 = expit_array(ev.eta1);
  ev.s01 = expit_array(ev.eta2);
  return ev;
}

void check_arms(const ModelData& data) {
  for (int z : {0, 1}) {
    double alive = 0.0;
    double dead = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.z(i) != z) continue;
      (data.s(i) == 1.0 ? alive : dead) += data.weight(i);
    }
    if (alive == 0.0 || dead == 0.0) {
      throw Error(ErrorKind::DegenerateLikelihood,
                  "arm z=" + std::to_string(z) + " needs both survivors and deaths");
    }
  }
}

}  // namespace

double survival_treated(const StrataParams& params, double a, std::span<const double> c) {
  return expit(linear(params.beta1, a, c));
}

double survival_ratio(const StrataParams& params, double a, std::span<const double> c) {
  return expit(linear(params.beta2, a, c));
}

StrataProbabilities strata_probs(const StrataParams& params, double a, std::span<const double> c) {
  const double s1 = survival_treated(params, a, c);
  const double s01 = survival_ratio(params, a, c);
  StrataProbabilities out;
  out.always_survivor = s1 * s01;
  out.protected_survivor = s1 - out.always_survivor;
  out.never_survivor = 1.0 - s1;
  return out;
}

StrataProbabilities membership_given_survival(const StrataParams& params, double a,
                                              std::span<const double> c, int z) {
  if (z != 0 && z != 1) throw Error(ErrorKind::InvalidInput, "z must be 0 or 1");
  StrataProbabilities out;
  if (z == 0) {
    out.always_survivor = 1.0;
    return out;
  }
  const double s01 = survival_ratio(params, a, c);
  out.always_survivor = s01;
  out.protected_survivor = 1.0 - s01;
  return out;
}

double strata_loglik(const ModelData& data, const Vector& theta) {
  const auto ev = evaluate(data, theta);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double w = data.weight(i);
    if (w == 0.0) continue;
    double li;
    if (data.z(i) == 1.0) {
      li = data.s(i) == 1.0 ? log_expit(ev.eta1(i)) : log_expit(-ev.eta1(i));
    } else if (data.s(i) == 1.0) {
      li = log_expit(ev.eta1(i)) + log_expit(ev.eta2(i));
    } else {
      li = std::log1p(-ev.s1(i) * ev.s01(i));
    }
    sum += w * li;
  }
  return sum / data.total_weight();
}

namespace {

// Per-row derivatives with respect to the two linear predictors.
void row_scores(const ModelData& data, const Evaluation& ev, Eigen::ArrayXd& d1,
                Eigen::ArrayXd& d2) {
  const Eigen::Index n = data.n();
  d1.resize(n);
  d2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.z(i) == 1.0) {
      d1(i) = data.s(i) - ev.s1(i);
      d2(i) = 0.0;
    } else {
      const double p = ev.s1(i) * ev.s01(i);
      const double u = (data.s(i) - p) / (1.0 - p);
      d1(i) = u * (1.0 - ev.s1(i));
      d2(i) = u * (1.0 - ev.s01(i));
    }
  }
}

Vector score_from(const ModelData& data, const Evaluation& ev) {
  Eigen::ArrayXd d1, d2;
  row_scores(data, ev, d1, d2);
  const Eigen::Index p = data.x.cols();
  Vector g(2 * p);
  const double total = data.total_weight();
  g.head(p) = data.x.transpose() * (data.weight * d1).matrix() / total;
  g.tail(p) = data.x.transpose() * (data.weight * d2).matrix() / total;
  return g;
}

Matrix hessian_from(const ModelData& data, const Evaluation& ev) {
  const Eigen::Index n = data.n();
  Eigen::ArrayXd h11(n), h12(n), h22(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s1 = ev.s1(i);
    const double s01 = ev.s01(i);
    if (data.z(i) == 1.0) {
      h11(i) = -s1 * (1.0 - s1);
      h12(i) = 0.0;
      h22(i) = 0.0;
      continue;
    }
    const double p = s1 * s01;
    const double q = 1.0 - p;
    const double u = (data.s(i) - p) / q;
    const double du = (data.s(i) - 1.0) / (q * q) * p;  // du/dp times p
    h11(i) = du * (1.0 - s1) * (1.0 - s1) - u * s1 * (1.0 - s1);
    h12(i) = du * (1.0 - s1) * (1.0 - s01);
    h22(i) = du * (1.0 - s01) * (1.0 - s01) - u * s01 * (1.0 - s01);
  }
  const Eigen::Index p = data.x.cols();
  const double total = data.total_weight();
  auto block = [&](const Eigen::ArrayXd& h) -> Matrix {
    return data.x.transpose() * (data.x.array().colwise() * (data.weight * h)).matrix() / total;
  };
  Matrix hess(2 * p, 2 * p);
  hess.topLeftCorner(p, p) = block(h11);
  hess.topRightCorner(p, p) = block(h12);
  hess.bottomLeftCorner(p, p) = hess.topRightCorner(p, p).transpose();
  hess.bottomRightCorner(p, p) = block(h22);
  return hess;
}

}  // namespace

Vector strata_score(const ModelData& data, const Vector& theta) {
  return score_from(data, evaluate(data, theta));
}

Matrix strata_hessian(const ModelData& data, const Vector& theta) {
  return hessian_from(data, evaluate(data, theta));
}

StrataFit fit_strata(const ModelData& data, const SolverConfig& cfg, const StrataParams* init) {
  check_arms(data);
  const Eigen::Index p = data.x.cols();

  Vector theta(2 * p);
  if (init) {
    theta << init->beta1, init->beta2;
  } else {
    const Eigen::ArrayXd treated = data.weight * data.z;
    theta.head(p) = logistic_regression(data.x, data.s, treated, cfg).theta;
    theta.tail(p).setZero();
  }

  // The optimizer asks for value, score and Hessian at the same point; keep
  // the last evaluation so each costs one pass over the rows.
  Vector cached_theta;
  Evaluation cached;
  auto at = [&](const Vector& t) -> const Evaluation& {
    if (cached_theta.size() != t.size() || cached_theta != t) {
      cached = evaluate(data, t);
      cached_theta = t;
    }
    return cached;
  };

  LogLikelihood ll;
  ll.value = [&](const Vector& t) { return strata_loglik(data, t); };
  ll.gradient = [&](const Vector& t) { return score_from(data, at(t)); };
  ll.hessian = [&](const Vector& t) { return hessian_from(data, at(t)); };

  const auto res = maximize_loglik(ll, theta, cfg);
  StrataFit fit;
  fit.params.beta1 = res.theta.head(p);
  fit.params.beta2 = res.theta.tail(p);
  fit.loglik = res.loglik;
  fit.gradient_norm = res.gradient_norm;
  fit.iterations = res.iterations;
  return fit;
}

StrataFit fit_strata(const Dataset& dataset, const SolverConfig& cfg) {
  return fit_strata(prepare(dataset), cfg);
}

StrataColumns strata_columns(const StrataParams& params, const ModelData& data) {
  return {expit_array((data.x * params.beta1).array()), expit_array((data.x * params.beta2).array())};
}

MonotonicityReport monotonicity_diagnostic(const Dataset& dataset) {
  MonotonicityReport rep;
  std::array<std::size_t, 2> arm{}, alive{};
  for (const auto& rec : dataset) {
    if (rec.z != 0 && rec.z != 1) continue;
    ++arm[rec.z];
    if (rec.s == 1) ++alive[rec.z];
  }
  for (int z : {0, 1}) {
    rep.rate[z] = arm[z] ? static_cast<double>(alive[z]) / static_cast<double>(arm[z]) : 0.0;
  }
  rep.flagged = rep.rate[1] < rep.rate[0];

  // Per-cell rates only when every covariate takes a handful of values.
  constexpr std::size_t kMaxLevels = 10;
  constexpr std::size_t kMaxCells = 256;
  const std::size_t dim = 1 + dataset.k();
  std::vector<std::set<double>> levels(dim);
  for (const auto& rec : dataset) {
    for (std::size_t j = 0; j < dim; ++j) {
      levels[j].insert(j == 0 ? rec.a : rec.c[j - 1]);
      if (levels[j].size() > kMaxLevels) return rep;
    }
  }
  std::map<std::vector<double>, SurvivalCell> cells;
  for (const auto& rec : dataset) {
    if (rec.z != 0 && rec.z != 1) continue;
    std::vector<double> key{rec.a};
    key.insert(key.end(), rec.c.begin(), rec.c.end());
    auto& cell = cells[key];
    if (cells.size() > kMaxCells) return rep;
    cell.key = key;
    ++cell.count[rec.z];
    if (rec.s == 1) cell.rate[rec.z] += 1.0;
  }
  rep.discrete = true;
  for (auto& [key, cell] : cells) {
    for (int z : {0, 1}) {
      if (cell.count[z]) cell.rate[z] /= static_cast<double>(cell.count[z]);
    }
    cell.flagged = cell.count[0] && cell.count[1] && cell.rate[1] < cell.rate[0];
    rep.cells.push_back(cell);
  }
  return rep;
}

RelevanceReport relevance_diagnostic(const StrataParams& params, const Dataset& dataset,
                                     double threshold) {
  RelevanceReport rep;
  rep.threshold = threshold;
  if (dataset.empty()) {
    rep.warning = true;
    return rep;
  }

  // Marginal distribution of A summarized by at most 256 quantile points.
  std::vector<double> a_values;
  a_values.reserve(dataset.n());
  for (const auto& rec : dataset) a_values.push_back(rec.a);
  std::sort(a_values.begin(), a_values.end());
  constexpr std::size_t kGrid = 256;
  std::vector<double> grid;
  if (a_values.size() <= kGrid) {
    grid = a_values;
  } else {
    for (std::size_t j = 0; j < kGrid; ++j) {
      const double pos = (static_cast<double>(j) + 0.5) / kGrid * static_cast<double>(a_values.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const double frac = pos - static_cast<double>(lo);
      const std::size_t hi = std::min(lo + 1, a_values.size() - 1);
      grid.push_back(a_values[lo] + frac * (a_values[hi] - a_values[lo]));
    }
  }

  std::vector<double> gaps;
  for (const auto& rec : dataset) {
    if (rec.z != 1 || rec.s != 1) continue;
    const double direct = survival_ratio(params, rec.a, rec.c);
    double num = 0.0;
    double den = 0.0;
    for (double a : grid) {
      const double s1 = survival_treated(params, a, rec.c);
      num += s1 * survival_ratio(params, a, rec.c);
      den += s1;
    }
    gaps.push_back(direct - num / den);
  }
  rep.rows = gaps.size();
  if (gaps.size() >= 2) {
    double mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    double ss = 0.0;
    for (double g : gaps) ss += (g - mean) * (g - mean);
    rep.statistic = ss / static_cast<double>(gaps.size() - 1);
  }
  rep.warning = rep.statistic < threshold;
  return rep;
}

}  // namespace sace
