#include "sace/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "sace/error.hpp"
#include "sace/parallel.hpp"

namespace sace {

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::Proposed: return "proposed";
    case Method::Naive: return "naive";
    case Method::IgnoreMnar: return "ignore-mnar";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "proposed") return Method::Proposed;
  if (text == "naive") return Method::Naive;
  if (text == "ignore-mnar" || text == "ignore_mnar") return Method::IgnoreMnar;
  throw Error(ErrorKind::InvalidInput, "unknown method '" + std::string(text) + "'");
}

namespace {

template <class F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& err) {
    throw err.with_stage(stage);
  }
}

PointFit naive_point(const ModelData& data) {
  double sum[2] = {0.0, 0.0};
  double weight[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.s(i) != 1.0 || data.r(i) != 1.0) continue;
    const auto z = static_cast<int>(data.z(i));
    sum[z] += data.weight(i) * data.y(i);
    weight[z] += data.weight(i);
  }
  for (int z : {0, 1}) {
    if (weight[z] == 0.0) {
      throw Error(ErrorKind::EmptyCell,
                  "no observed survivor outcome in arm z=" + std::to_string(z), "naive");
    }
  }
  PointFit out;
  out.treated_mean = sum[1] / weight[1];
  out.control_mean = sum[0] / weight[0];
  out.delta_hat = out.treated_mean - out.control_mean;
  return out;
}

}  // namespace

PointFit plug_in(const ModelData& data, const StrataParams& strata, const Vector& treated_always,
                 const Vector& control_always) {
  // Average over all rows weighted by always-survivor probability.
  const auto cols = strata_columns(strata, data);
  const Eigen::ArrayXd w = data.weight * cols.s1 * cols.s01;
  const double total = w.sum();
  if (!(total > 0.0)) {
    throw Error(ErrorKind::DegenerateLikelihood, "always-survivor weights sum to zero", "estimate");
  }
  const Eigen::ArrayXd mu1 = (data.xc * treated_always).array().unaryExpr([](double v) { return expit(v); });
  const Eigen::ArrayXd mu0 = (data.x * control_always).array().unaryExpr([](double v) { return expit(v); });

  PointFit out;
  out.treated_mean = (w * mu1).sum() / total;
  out.control_mean = (w * mu0).sum() / total;
  out.delta_hat = out.treated_mean - out.control_mean;
  return out;
}

PointFit fit_point(const ModelData& data, Method method, const EstimatorConfig& cfg,
                   const ComponentFits* warm) {
  if (method == Method::Naive) return naive_point(data);

  const auto* h1 = cfg.h1 ? &*cfg.h1 : nullptr;
  const auto* h2 = cfg.h2 ? &*cfg.h2 : nullptr;
  const auto* h3 = cfg.h3 ? &*cfg.h3 : nullptr;

  ComponentFits fits;
  fits.strata = staged("strata", [&] {
    return fit_strata(data, cfg.likelihood_solver, warm ? &warm->strata.params : nullptr);
  });

  if (method == Method::IgnoreMnar) {
    fits.missingness.params.alpha = Vector::Zero(data.x.cols() + 1);
    fits.missingness.params.eta = cfg.eta;
    fits.missingness.params.always_observed = true;
  } else {
    fits.missingness = staged("missingness", [&] {
      const bool usable = warm && !warm->missingness.params.always_observed &&
                          !warm->missingness.params.saturated;
      return fit_missingness(data, cfg.eta, h1, cfg.moment_solver,
                             usable ? &warm->missingness.params.alpha : nullptr);
    });
  }

  const auto& m = fits.missingness.params;
  fits.treated = staged("treated_outcome", [&] {
    return fit_treated_outcomes(data, m, fits.strata.params, h2, cfg.moment_solver,
                                warm ? &warm->treated : nullptr);
  });
  fits.control = staged("control_outcome", [&] {
    return fit_control_outcome(data, m, h3, cfg.moment_solver,
                               warm ? &warm->control.control_always : nullptr);
  });

  PointFit out = plug_in(data, fits.strata.params, fits.treated.treated_always,
                         fits.control.control_always);
  out.components = std::move(fits);
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidInput, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_ci(const ModelData& data,
                             const std::function<double(const ModelData&)>& estimator, int B,
                             std::uint64_t seed, IntervalKind kind, double level,
                             unsigned workers) {
  if (B < 2) throw Error(ErrorKind::InvalidInput, "bootstrap needs B >= 2", "bootstrap");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorKind::InvalidInput, "confidence level must lie in (0,1)", "bootstrap");
  }

  std::vector<std::optional<double>> values(static_cast<std::size_t>(B));
  parallel_for(values.size(), workers, [&](std::size_t b) {
    auto stream = seeded_stream(seed, b);
    const ModelData resample = reweighted(data, resample_counts(data.n(), stream));
    try {
      const double v = estimator(resample);
      if (std::isfinite(v)) values[b] = v;
    } catch (const Error&) {
      // dropped; counted below
    }
  });

  BootstrapResult res;
  res.requested = B;
  for (const auto& v : values) {
    if (v) res.replicates.push_back(*v);
  }
  res.converged = static_cast<int>(res.replicates.size());
  res.failed = B - res.converged;
  if (res.converged < 0.8 * B) {
    throw Error(ErrorKind::TooFewReplicates,
                std::to_string(res.converged) + " of " + std::to_string(B) +
                    " bootstrap replicates converged",
                "bootstrap");
  }

  const double tail = (1.0 - level) / 2.0;
  if (kind == IntervalKind::Percentile) {
    std::vector<double> sorted = res.replicates;
    std::sort(sorted.begin(), sorted.end());
    res.low = quantile_sorted(sorted, tail);
    res.high = quantile_sorted(sorted, 1.0 - tail);
  } else {
    double mean = 0.0;
    for (double v : res.replicates) mean += v;
    mean /= res.converged;
    double ss = 0.0;
    for (double v : res.replicates) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (res.converged - 1));
    const double zq = boost::math::quantile(boost::math::normal(), 1.0 - tail);
    const double center = estimator(data);
    res.low = center - zq * se;
    res.high = center + zq * se;
  }
  return res;
}

RankCondition rank_condition(const ModelData& data, const MissingnessParams& missingness) {
  const Eigen::ArrayXd inv = inverse_propensity(missingness, data);
  double num[2] = {0.0, 0.0};
  double den[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (inv(i) == 0.0) continue;
    const auto z = static_cast<int>(data.z(i));
    const double v = data.weight(i) * inv(i);
    num[z] += v * data.y(i);
    den[z] += v;
  }
  RankCondition rc;
  rc.treated_rate = den[1] > 0.0 ? num[1] / den[1] : 0.0;
  rc.control_rate = den[0] > 0.0 ? num[0] / den[0] : 0.0;
  // det [[1-p1, p1], [1-p0, p0]] = p0 - p1
  rc.determinant = rc.control_rate - rc.treated_rate;
  rc.warning = std::abs(rc.determinant) < 1e-3;
  return rc;
}

OutcomeParams FitReport::outcome_params() const {
  if (!components) throw Error(ErrorKind::InvalidInput, "report carries no model components");
  return {components->treated.treated_always, components->treated.treated_protected,
          components->control.control_always};
}

FitReport estimate(const ModelData& data, Method method, const EstimatorConfig& cfg,
                   const Dataset* source) {
  FitReport rep;
  rep.method = method;
  rep.eta = method == Method::Naive ? 0.0 : cfg.eta;
  rep.seed = cfg.seed;
  rep.interval = cfg.interval;

  PointFit point = fit_point(data, method, cfg);
  rep.delta_hat = point.delta_hat;
  rep.treated_mean = point.treated_mean;
  rep.control_mean = point.control_mean;
  rep.components = point.components;

  if (cfg.bootstrap > 0) {
    const ComponentFits* warm = cfg.warm_start && point.components ? &*point.components : nullptr;
    const auto boot = bootstrap_ci(
        data,
        [&](const ModelData& d) {
          if (!warm) return fit_point(d, method, cfg).delta_hat;
          try {
            return fit_point(d, method, cfg, warm).delta_hat;
          } catch (const Error&) {
            return fit_point(d, method, cfg).delta_hat;  // warm start can land in a bad basin
          }
        },
        cfg.bootstrap, cfg.seed, cfg.interval, cfg.level, cfg.workers);
    rep.ci_low = boot.low;
    rep.ci_high = boot.high;
    rep.bootstrap = boot.requested;
    rep.bootstrap_converged = boot.converged;
    rep.bootstrap_failed = boot.failed;
    if (boot.failed > 0) {
      rep.warnings.push_back(std::to_string(boot.failed) + " bootstrap replicate(s) failed and were dropped");
    }
    if (rep.delta_hat < boot.low || rep.delta_hat > boot.high) {
      rep.warnings.push_back("point estimate lies outside its bootstrap interval");
    }
  }

  if (cfg.diagnostics && rep.components) {
    if (source) {
      rep.monotonicity = monotonicity_diagnostic(*source);
      if (rep.monotonicity->flagged) {
        rep.warnings.push_back("treated survival rate below control survival rate");
      }
      rep.relevance = relevance_diagnostic(rep.components->strata.params, *source);
      if (rep.relevance->warning) {
        rep.warnings.push_back("proxy carries little information about stratum membership");
      }
    }
    rep.rank = rank_condition(data, rep.components->missingness.params);
    if (rep.rank->warning) {
      rep.warnings.push_back("outcome distribution barely differs between arms; response model weakly identified");
    }
    if (rep.components->treated.collapsed) {
      rep.warnings.push_back("protected stratum vanished; treated mixture collapsed to one stratum");
    }
  }
  return rep;
}

FitReport estimate(const Dataset& dataset, Method method, const EstimatorConfig& cfg) {
  const ModelData data = staged("input", [&] { return prepare(dataset); });
  return estimate(data, method, cfg, &dataset);
}

FitReport estimate_sace(const Dataset& dataset, const EstimatorConfig& cfg) {
  return estimate(dataset, Method::Proposed, cfg);
}

FitReport naive_estimate(const Dataset& dataset, const EstimatorConfig& cfg) {
  return estimate(dataset, Method::Naive, cfg);
}

FitReport ignore_mnar_estimate(const Dataset& dataset, const EstimatorConfig& cfg) {
  return estimate(dataset, Method::IgnoreMnar, cfg);
}

std::vector<SensitivityPoint> sensitivity_curve(const Dataset& dataset,
                                                const std::vector<double>& eta_grid,
                                                const EstimatorConfig& cfg) {
  if (eta_grid.empty()) throw Error(ErrorKind::InvalidInput, "eta grid is empty", "sensitivity");
  const ModelData data = staged("input", [&] { return prepare(dataset); });
  std::vector<SensitivityPoint> curve;
  for (double eta : eta_grid) {
    SensitivityPoint pt;
    pt.eta = eta;
    EstimatorConfig at = cfg;
    at.eta = eta;
    try {
      pt.report = estimate(data, Method::Proposed, at, &dataset);
    } catch (const Error& err) {
      pt.error = err.what();
    }
    curve.push_back(std::move(pt));
  }
  return curve;
}

}  // namespace sace
