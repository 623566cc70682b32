#include "sace/simulation.hpp"

#include <cmath>
#include <ostream>

#include "sace/csv.hpp"
#include "sace/error.hpp"
#include "sace/parallel.hpp"

namespace sace {

std::string Scenario::name() const {
  switch (kind) {
    case ScenarioKind::Base: return "base";
    case ScenarioKind::MixedCov: return "mixed_cov";
    case ScenarioKind::Sensitivity: return "sensitivity:" + format_real(eta);
    case ScenarioKind::BoundsViolation: return "bounds_violation";
  }
  return "unknown";
}

Scenario parse_scenario(const std::string& text, double eta) {
  if (text == "base") return Scenario::base();
  if (text == "mixed_cov") return Scenario::mixed_cov();
  if (text == "bounds_violation") return Scenario::bounds_violation();
  if (text == "sensitivity") return Scenario::sensitivity(eta);
  const std::string prefix = "sensitivity:";
  if (text.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const std::string rest = text.substr(prefix.size());
      const double value = std::stod(rest, &used);
      if (used == rest.size() && std::isfinite(value)) return Scenario::sensitivity(value);
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorKind::InvalidInput, "unknown scenario '" + text + "'");
}

double DgpModel::survival_treated(double a, double c) const { return expit(0.55 + 0.25 * a + c); }

double DgpModel::survival_ratio(double a, double c) const { return expit(0.45 - 0.5 * a + c); }

double DgpModel::outcome(int z, Stratum g, double a, double c) const {
  double shift = 0.0;
  if (scenario.kind == ScenarioKind::Sensitivity) shift = 0.1 * scenario.eta * a;
  if (scenario.kind == ScenarioKind::BoundsViolation) shift = 0.02 * a;
  if (z == 1 && g == Stratum::AlwaysSurvivor) return expit(0.9 + shift + 0.3 * c);
  if (z == 1 && g == Stratum::Protected) return expit(0.5 + shift + 0.4 * c);
  if (z == 0 && g == Stratum::AlwaysSurvivor) return expit(-0.5 + shift + 0.3 * c);
  throw Error(ErrorKind::UnsupportedStratumArm, "outcome undefined for this stratum and arm");
}

double DgpModel::response(int z, double a, double /*c*/, int y) const {
  double offset = 0.0;
  if (scenario.kind == ScenarioKind::Sensitivity) offset = scenario.eta * z;
  if (scenario.kind == ScenarioKind::BoundsViolation) offset = 0.2 * z;
  return expit(1.5 + offset + 0.5 * a + 1.1 * y);
}

namespace {

void draw_covariates(const Scenario& scenario, RandomStream& rng, double& a, double& c) {
  if (scenario.kind == ScenarioKind::MixedCov) {
    a = rng.uniform() < 0.3 ? 1.0 : 0.0;
    c = rng.uniform();
  } else {
    a = rng.normal();
    c = rng.normal();
  }
}

// Standard logistic variate from a uniform strictly inside (0, 1).
double logistic_noise(RandomStream& rng) {
  const double u = (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
  return std::log(u) - std::log1p(-u);
}

}  // namespace

Simulated generate_latent(const DgpSpec& spec) {
  if (spec.n < 1) throw Error(ErrorKind::InvalidInput, "n must be at least 1");
  if (!std::isfinite(spec.scenario.eta)) throw Error(ErrorKind::InvalidInput, "eta must be finite");
  const DgpModel model{spec.scenario};
  auto rng = seeded_stream(spec.seed, spec.stream);

  std::vector<ObservationRecord> records;
  records.reserve(spec.n);
  Simulated out;
  if (spec.emit_latent) {
    out.stratum.reserve(spec.n);
    out.y_star.reserve(spec.n);
  }
  out.y_raw.reserve(spec.n);

  for (std::size_t i = 0; i < spec.n; ++i) {
    double a = 0.0;
    double c = 0.0;
    draw_covariates(spec.scenario, rng, a, c);
    const int z = rng.uniform() < 0.6 ? 1 : 0;

    const double s1 = model.survival_treated(a, c);
    const double s01 = model.survival_ratio(a, c);
    const double u = rng.uniform();
    Stratum g = Stratum::NeverSurvivor;
    if (u < s1 * s01) {
      g = Stratum::AlwaysSurvivor;
    } else if (u < s1) {
      g = Stratum::Protected;
    }
    const bool alive = (z == 1 && g != Stratum::NeverSurvivor) || (z == 0 && g == Stratum::AlwaysSurvivor);

    ObservationRecord rec;
    rec.z = z;
    rec.s = alive ? 1 : 0;
    rec.a = a;
    rec.c = {c};
    std::optional<int> y_star;
    std::optional<double> raw;
    if (alive) {
      const double p = model.outcome(z, g, a, c);
      const double latent = std::log(p) - std::log1p(-p) + logistic_noise(rng);
      y_star = latent > 0.0 ? 1 : 0;
      rec.r = rng.uniform() < model.response(z, a, c, *y_star) ? 1 : 0;
      if (rec.r == 1) {
        rec.y = *y_star;
        raw = latent;
      }
    }
    records.push_back(std::move(rec));
    out.y_raw.push_back(raw);
    if (spec.emit_latent) {
      out.stratum.push_back(g);
      out.y_star.push_back(y_star);
    }
  }
  out.data = Dataset(std::move(records), {"c1"});
  return out;
}

Dataset generate(const DgpSpec& spec) {
  DgpSpec plain = spec;
  plain.emit_latent = false;
  return generate_latent(plain).data;
}

double true_sace(const Scenario& scenario, std::size_t n_oracle, std::uint64_t seed) {
  if (n_oracle < 1) throw Error(ErrorKind::InvalidInput, "n_oracle must be positive");
  const DgpModel model{scenario};
  auto rng = seeded_stream(seed, 0x5ace);
  // long double accumulators; the sums run over 1e7 terms
  long double num = 0.0L;
  long double den = 0.0L;
  for (std::size_t i = 0; i < n_oracle; ++i) {
    double a = 0.0;
    double c = 0.0;
    draw_covariates(scenario, rng, a, c);
    const double w = model.survival_treated(a, c) * model.survival_ratio(a, c);
    num += w * (model.outcome(1, Stratum::AlwaysSurvivor, a, c) -
                model.outcome(0, Stratum::AlwaysSurvivor, a, c));
    den += w;
  }
  return static_cast<double>(num / den);
}

double always_survivor_share(const Scenario& scenario, std::size_t n_oracle, std::uint64_t seed) {
  const DgpModel model{scenario};
  auto rng = seeded_stream(seed, 0x55);
  long double sum = 0.0L;
  for (std::size_t i = 0; i < n_oracle; ++i) {
    double a = 0.0;
    double c = 0.0;
    draw_covariates(scenario, rng, a, c);
    sum += model.survival_treated(a, c) * model.survival_ratio(a, c);
  }
  return static_cast<double>(sum / static_cast<long double>(n_oracle));
}

StudyResult monte_carlo_study(const StudyConfig& cfg) {
  if (cfg.reps < 1) throw Error(ErrorKind::InvalidInput, "reps must be at least 1", "monte_carlo");
  if (cfg.methods.empty()) throw Error(ErrorKind::InvalidInput, "no methods selected", "monte_carlo");

  StudyResult res;
  res.scenario = cfg.scenario;
  res.n = cfg.n;
  res.reps = cfg.reps;
  res.bootstrap = cfg.bootstrap;
  res.master_seed = cfg.master_seed;
  res.truth = cfg.truth ? *cfg.truth : true_sace(cfg.scenario, cfg.n_oracle);

  const std::size_t m = cfg.methods.size();
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(cfg.reps) * m);
  parallel_for(static_cast<std::size_t>(cfg.reps), cfg.workers, [&](std::size_t idx) {
    const std::uint64_t r = idx + 1;
    DgpSpec spec;
    spec.scenario = cfg.scenario;
    spec.n = cfg.n;
    spec.seed = cfg.master_seed;
    spec.stream = r;
    const Dataset data = generate(spec);

    EstimatorConfig est = cfg.estimator;
    est.bootstrap = cfg.bootstrap;
    est.seed = derive_seed(cfg.master_seed, r);
    est.workers = 1;  // replicates already run in parallel
    est.diagnostics = false;

    for (std::size_t j = 0; j < m; ++j) {
      ReplicateRecord& rec = records[idx * m + j];
      rec.replicate = r;
      rec.method = cfg.methods[j];
      try {
        const FitReport rep = estimate(data, cfg.methods[j], est);
        rec.estimate = rep.delta_hat;
        rec.ci_low = rep.ci_low.value_or(rep.delta_hat);
        rec.ci_high = rep.ci_high.value_or(rep.delta_hat);
        rec.ok = true;
      } catch (const Error& err) {
        rec.error = err.what();
      }
    }
  });

  for (std::size_t j = 0; j < m; ++j) {
    MethodSummary row;
    row.method = cfg.methods[j];
    double sum = 0.0;
    double sq = 0.0;
    double width = 0.0;
    int covered = 0;
    for (int idx = 0; idx < cfg.reps; ++idx) {
      const auto& rec = records[static_cast<std::size_t>(idx) * m + j];
      if (!rec.ok) {
        ++row.failed;
        continue;
      }
      ++row.replicates;
      sum += rec.estimate;
      sq += (rec.estimate - res.truth) * (rec.estimate - res.truth);
      width += rec.ci_high - rec.ci_low;
      if (rec.ci_low <= res.truth && res.truth <= rec.ci_high) ++covered;
    }
    if (row.replicates > 0) {
      const double k = row.replicates;
      row.mean_estimate = sum / k;
      row.bias100 = 100.0 * (row.mean_estimate - res.truth);
      row.rmse100 = 100.0 * std::sqrt(sq / k);
      row.coverage100 = 100.0 * covered / k;
      row.mean_width = width / k;
    }
    res.rows.push_back(row);
  }
  res.replicates = std::move(records);

  for (const auto& row : res.rows) {
    if (row.failed > cfg.max_failure_rate * cfg.reps) {
      throw Error(ErrorKind::TooManyFailures,
                  std::string(to_string(row.method)) + " failed in " + std::to_string(row.failed) +
                      " of " + std::to_string(cfg.reps) + " replicates",
                  "monte_carlo");
    }
  }
  return res;
}

std::vector<BoundsRecord> bounds_study(const BoundsStudyConfig& cfg) {
  if (cfg.reps < 1) throw Error(ErrorKind::InvalidInput, "reps must be at least 1", "bounds_study");
  std::vector<BoundsRecord> records(static_cast<std::size_t>(cfg.reps));
  CellSpec spec;
  spec.thresholds = {0.0, 0.0};
  const std::vector<Eigen::Index> columns = {2, 1};  // C1 then A

  parallel_for(records.size(), cfg.workers, [&](std::size_t idx) {
    BoundsRecord& rec = records[idx];
    rec.replicate = idx + 1;
    DgpSpec dgp;
    dgp.scenario = cfg.scenario;
    dgp.n = cfg.n;
    dgp.seed = cfg.master_seed;
    dgp.stream = rec.replicate;
    try {
      const ModelData data = prepare(generate(dgp));
      const auto adjusted = adjusted_bounds(build_cells(data, columns, spec));
      const auto unadjusted = unadjusted_bounds(data);
      rec.adjusted_lower = adjusted.lower;
      rec.adjusted_upper = adjusted.upper;
      rec.unadjusted_lower = unadjusted.lower;
      rec.unadjusted_upper = unadjusted.upper;
      rec.ok = true;
      if (cfg.point_estimate) {
        try {
          rec.estimate = fit_point(data, Method::Proposed, EstimatorConfig{}).delta_hat;
        } catch (const Error& err) {
          rec.error = err.what();
        }
      }
    } catch (const Error& err) {
      rec.error = err.what();
    }
  });
  return records;
}

void write_study_table(std::ostream& out, const std::vector<StudyResult>& studies) {
  out << "scenario,method,n,reps,bootstrap,truth,mean_estimate,bias_x100,rmse_x100,coverage_x100,"
         "mean_ci_width,succeeded,failed\n";
  for (const auto& s : studies) {
    for (const auto& row : s.rows) {
      out << s.scenario.name() << ',' << to_string(row.method) << ',' << s.n << ',' << s.reps << ','
          << s.bootstrap << ',' << format_real(s.truth) << ',' << format_real(row.mean_estimate)
          << ',' << format_real(row.bias100) << ',' << format_real(row.rmse100) << ','
          << format_real(row.coverage100) << ',' << format_real(row.mean_width) << ','
          << row.replicates << ',' << row.failed << '\n';
    }
  }
}

void write_study_replicates(std::ostream& out, const std::vector<StudyResult>& studies) {
  out << "scenario,method,n,replicate,ok,estimate,ci_low,ci_high,error\n";
  for (const auto& s : studies) {
    for (const auto& rec : s.replicates) {
      out << s.scenario.name() << ',' << to_string(rec.method) << ',' << s.n << ','
          << rec.replicate << ',' << (rec.ok ? 1 : 0) << ',';
      if (rec.ok) {
        out << format_real(rec.estimate) << ',' << format_real(rec.ci_low) << ','
            << format_real(rec.ci_high);
      } else {
        out << ",,";
      }
      std::string err = rec.error;
      for (auto& ch : err) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      out << ',' << err << '\n';
    }
  }
}

void write_bounds_replicates(std::ostream& out, const std::vector<BoundsRecord>& records) {
  out << "replicate,ok,unadjusted_lower,adjusted_lower,estimate,adjusted_upper,unadjusted_upper\n";
  for (const auto& rec : records) {
    out << rec.replicate << ',' << (rec.ok ? 1 : 0) << ',';
    if (rec.ok) {
      out << format_real(rec.unadjusted_lower) << ',' << format_real(rec.adjusted_lower) << ',';
      if (rec.estimate) out << format_real(*rec.estimate);
      out << ',' << format_real(rec.adjusted_upper) << ',' << format_real(rec.unadjusted_upper);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

}  // namespace sace
