#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "sace/bounds.hpp"
#include "sace/csv.hpp"
#include "sace/error.hpp"
#include "sace/estimator.hpp"
#include "sace/simulation.hpp"

namespace sace::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// JSON has no infinities; they are written as strings.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json named(const Vector& v, const std::vector<std::string>& names) {
  json out = json::object();
  for (Eigen::Index i = 0; i < v.size(); ++i) out[names[static_cast<std::size_t>(i)]] = num(v(i));
  return out;
}

std::vector<std::string> labels(const std::vector<std::string>& covariates, bool with_a, bool with_y) {
  std::vector<std::string> out{"intercept"};
  if (with_a) out.push_back("a");
  out.insert(out.end(), covariates.begin(), covariates.end());
  if (with_y) out.push_back("y");
  return out;
}

CsvOptions csv_options(const RunConfig& cfg, std::optional<double> kappa) {
  CsvOptions opt;
  opt.a_column = cfg.a_col;
  if (!cfg.c_cols.empty()) opt.c_columns = cfg.c_cols;
  opt.kappa = kappa;
  opt.raw_outcome_column = cfg.raw_col;
  return opt;
}

Dataset load(const RunConfig& cfg) {
  if (cfg.input.empty()) throw Error(ErrorKind::InvalidInput, "--input is required", "input");
  try {
    return read_csv_file(cfg.input, csv_options(cfg, cfg.kappa));
  } catch (const Error& e) {
    throw e.stage().empty() ? e.with_stage("input") : e;
  }
}

IntervalKind parse_interval(const std::string& text) {
  if (text == "percentile") return IntervalKind::Percentile;
  if (text == "normal") return IntervalKind::Normal;
  throw Error(ErrorKind::InvalidInput, "unknown interval kind '" + text + "'", "config");
}

EmptyCellPolicy parse_policy(const std::string& text) {
  if (text == "merge") return EmptyCellPolicy::Merge;
  if (text == "drop") return EmptyCellPolicy::DropReweight;
  if (text == "fail") return EmptyCellPolicy::Fail;
  throw Error(ErrorKind::InvalidInput, "unknown cell policy '" + text + "'", "config");
}

EstimatorConfig estimator_config(const RunConfig& cfg) {
  EstimatorConfig e;
  e.eta = cfg.eta;
  e.bootstrap = cfg.bootstrap;
  e.seed = cfg.seed;
  e.interval = parse_interval(cfg.interval);
  e.level = cfg.level;
  e.workers = cfg.workers;
  e.warm_start = cfg.warm_start;
  e.diagnostics = true;
  return e;
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::InvalidInput, "cannot write " + path.string(), "output");
  return f;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

std::string csv_text(std::string s) {
  for (auto& ch : s) {
    if (ch == ',' || ch == '\n') ch = ';';
  }
  return s;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : ""; }

json monotonicity_json(const MonotonicityReport& m) {
  json cells = json::array();
  for (const auto& c : m.cells) {
    cells.push_back({{"key", c.key},
                     {"count", c.count},
                     {"rate", {num(c.rate[0]), num(c.rate[1])}},
                     {"flagged", c.flagged}});
  }
  return {{"survival_rate", {{"z0", num(m.rate[0])}, {"z1", num(m.rate[1])}}},
          {"flagged", m.flagged},
          {"per_cell", m.discrete},
          {"cells", cells}};
}

json cell_summary_json(const CellSummary& s) {
  json rows = json::array();
  for (const auto& r : s.rows) {
    json mean = json::array(), sd = json::array();
    for (double v : r.mean) mean.push_back(num(v));
    for (double v : r.sd) sd.push_back(num(v));
    rows.push_back({{"z", r.z},
                    {"s", r.s},
                    {"r", r.r},
                    {"count", r.count},
                    {"mean", mean},
                    {"sd", sd},
                    {"y_mean", r.y_mean ? num(*r.y_mean) : json(nullptr)}});
  }
  json empty = json::array();
  for (const auto& p : s.empty_patterns) empty.push_back({p[0], p[1], p[2]});
  return {{"columns", s.columns},
          {"rows", rows},
          {"empty_patterns", empty},
          {"survival_rate", {num(s.survival_rate[0]), num(s.survival_rate[1])}},
          {"arm_size", {s.arm_size[0], s.arm_size[1]}}};
}

json report_json(const FitReport& r, const Dataset& ds) {
  const auto& cov = ds.covariate_names();
  json j;
  j["method"] = std::string(to_string(r.method));
  j["delta_hat"] = num(r.delta_hat);
  j["treated_mean"] = num(r.treated_mean);
  j["control_mean"] = num(r.control_mean);
  j["eta"] = num(r.eta);
  json boot = {{"requested", r.bootstrap},
               {"converged", r.bootstrap_converged},
               {"failed", r.bootstrap_failed},
               {"seed", r.seed},
               {"interval", r.interval == IntervalKind::Percentile ? "percentile" : "normal"}};
  if (r.ci_low) {
    boot["ci_low"] = num(*r.ci_low);
    boot["ci_high"] = num(*r.ci_high);
  }
  j["bootstrap"] = boot;

  if (r.components) {
    const auto& c = *r.components;
    const auto& m = c.missingness;
    json params;
    params["strata"] = {{"survival_treated", named(c.strata.params.beta1, labels(cov, true, false))},
                        {"survival_ratio", named(c.strata.params.beta2, labels(cov, true, false))},
                        {"loglik", num(c.strata.loglik)},
                        {"iterations", c.strata.iterations}};
    params["missingness"] = {{"alpha", named(m.params.alpha, labels(cov, true, true))},
                             {"eta", num(m.params.eta)},
                             {"always_observed", m.params.always_observed},
                             {"saturated", m.params.saturated},
                             {"residual_norm", num(m.residual_norm)},
                             {"iterations", m.iterations}};
    const auto treated_names = labels(cov, false, false);
    params["treated_outcome"] = {
        {"always_survivor", named(c.treated.treated_always, treated_names)},
        {"protected", c.treated.treated_protected ? named(*c.treated.treated_protected, treated_names)
                                                  : json(nullptr)},
        {"collapsed", c.treated.collapsed},
        {"residual_norm", num(c.treated.residual_norm)}};
    params["control_outcome"] = {{"always_survivor", named(c.control.control_always, labels(cov, true, false))},
                                 {"residual_norm", num(c.control.residual_norm)}};
    j["parameters"] = params;
  }

  json diag = json::object();
  if (r.monotonicity) diag["monotonicity"] = monotonicity_json(*r.monotonicity);
  if (r.relevance) {
    diag["relevance"] = {{"statistic", num(r.relevance->statistic)},
                         {"threshold", num(r.relevance->threshold)},
                         {"warning", r.relevance->warning},
                         {"rows", r.relevance->rows}};
  }
  if (r.rank) {
    diag["rank_condition"] = {{"treated_rate", num(r.rank->treated_rate)},
                              {"control_rate", num(r.rank->control_rate)},
                              {"determinant", num(r.rank->determinant)},
                              {"warning", r.rank->warning}};
  }
  j["diagnostics"] = diag;
  j["warnings"] = r.warnings;
  return j;
}

void write_vector(std::ostream& out, const std::string& title, const Vector& v,
                  const std::vector<std::string>& names) {
  fmt::print(out, "  {}\n", title);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    fmt::print(out, "    {:<14} {:>12.6f}\n", names[static_cast<std::size_t>(i)], v(i));
  }
}

void write_report_text(std::ostream& out, const FitReport& r, const Dataset& ds) {
  const auto& cov = ds.covariate_names();
  fmt::print(out, "SACE estimate ({})\n", to_string(r.method));
  fmt::print(out, "  n                {}\n", ds.n());
  fmt::print(out, "  delta_hat        {:.6f}\n", r.delta_hat);
  fmt::print(out, "  treated mean     {:.6f}\n", r.treated_mean);
  fmt::print(out, "  control mean     {:.6f}\n", r.control_mean);
  if (r.ci_low) {
    fmt::print(out, "  {} CI    [{:.6f}, {:.6f}]  (B={}, converged {}, seed {})\n",
               r.interval == IntervalKind::Percentile ? "percentile" : "normal    ", *r.ci_low,
               *r.ci_high, r.bootstrap, r.bootstrap_converged, r.seed);
  }
  fmt::print(out, "  eta              {}\n\n", r.eta);
  if (r.components) {
    const auto& c = *r.components;
    fmt::print(out, "Parameters\n");
    write_vector(out, "survival under treatment", c.strata.params.beta1, labels(cov, true, false));
    write_vector(out, "control/treated survival ratio", c.strata.params.beta2, labels(cov, true, false));
    if (c.missingness.params.always_observed) {
      fmt::print(out, "  response model: every survivor outcome treated as observed\n");
    } else {
      write_vector(out, c.missingness.params.saturated ? "response model (boundary fit)" : "response model",
                   c.missingness.params.alpha, labels(cov, true, true));
    }
    write_vector(out, "treated outcome, always survivors", c.treated.treated_always, labels(cov, false, false));
    if (c.treated.treated_protected) {
      write_vector(out, "treated outcome, protected", *c.treated.treated_protected, labels(cov, false, false));
    }
    write_vector(out, "control outcome, always survivors", c.control.control_always, labels(cov, true, false));
    fmt::print(out, "\n");
  }
  fmt::print(out, "Diagnostics\n");
  if (r.monotonicity) {
    fmt::print(out, "  survival rate    z=0 {:.4f}  z=1 {:.4f}{}\n", r.monotonicity->rate[0],
               r.monotonicity->rate[1], r.monotonicity->flagged ? "  (monotonicity flagged)" : "");
  }
  if (r.relevance) {
    fmt::print(out, "  relevance        {:.3e} (threshold {:.1e}){}\n", r.relevance->statistic,
               r.relevance->threshold, r.relevance->warning ? "  WARNING" : "");
  }
  if (r.rank) {
    fmt::print(out, "  rank determinant {:.4f}{}\n", r.rank->determinant, r.rank->warning ? "  WARNING" : "");
  }
  for (const auto& w : r.warnings) fmt::print(out, "  warning: {}\n", w);
}

std::vector<Method> study_methods(const RunConfig& cfg) {
  if (cfg.methods.empty()) return {Method::Proposed, Method::Naive, Method::IgnoreMnar};
  std::vector<Method> out;
  for (const auto& m : cfg.methods) out.push_back(parse_method(m));
  return out;
}

CellSpec cell_spec(const RunConfig& cfg) {
  CellSpec spec;
  spec.discrete = cfg.discrete_cells;
  spec.policy = parse_policy(cfg.cell_policy);
  spec.clip_eps = cfg.clip_eps;
  bool any_threshold = false;
  for (const auto& item : cfg.cells) {
    const auto colon = item.find(':');
    spec.columns.push_back(item.substr(0, colon));
    if (colon == std::string::npos) {
      spec.thresholds.emplace_back();
      continue;
    }
    any_threshold = true;
    const std::string text = item.substr(colon + 1);
    std::size_t used = 0;
    double thr = 0.0;
    try {
      thr = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || !std::isfinite(thr)) {
      throw Error(ErrorKind::InvalidInput, "bad cell threshold in '" + item + "'", "config");
    }
    spec.thresholds.emplace_back(thr);
  }
  if (!any_threshold) spec.thresholds.clear();
  return spec;
}

json bounds_json(const BoundsResult& b) {
  json cells = json::array();
  for (const auto& c : b.cells) {
    cells.push_back({{"key", c.key}, {"weight", num(c.weight)}, {"lower", num(c.lower)}, {"upper", num(c.upper)}});
  }
  json j = {{"variant", std::string(to_string(b.variant))},
            {"lower", num(b.lower)},
            {"upper", num(b.upper)},
            {"width", num(b.width())},
            {"cells", cells},
            {"clipped", b.clipped},
            {"merged", b.merged},
            {"dropped", b.dropped},
            {"diagnostics", b.diagnostics}};
  if (b.lower_ci) {
    j["lower_ci"] = {num((*b.lower_ci)[0]), num((*b.lower_ci)[1])};
    j["upper_ci"] = {num((*b.upper_ci)[0]), num((*b.upper_ci)[1])};
    j["bootstrap"] = b.bootstrap;
    j["bootstrap_failed"] = b.bootstrap_failed;
  }
  return j;
}

void bounds_row(std::ostream& out, const BoundsResult& b) {
  out << to_string(b.variant) << ',' << format_real(b.lower) << ',' << format_real(b.upper) << ','
      << format_real(b.width()) << ',';
  if (b.lower_ci) {
    out << format_real((*b.lower_ci)[0]) << ',' << format_real((*b.lower_ci)[1]) << ','
        << format_real((*b.upper_ci)[0]) << ',' << format_real((*b.upper_ci)[1]);
  } else {
    out << ",,,";
  }
  out << ',' << b.cells.size() << ',' << b.clipped << ',' << b.merged << ',' << b.dropped << '\n';
}

}  // namespace

json to_json(const RunConfig& c) {
  json j = {{"command", c.command},
            {"input", c.input},
            {"a_col", c.a_col},
            {"c_cols", c.c_cols},
            {"raw_col", c.raw_col},
            {"kappa", c.kappa ? json(*c.kappa) : json(nullptr)},
            {"kappa_grid", c.kappa_grid},
            {"method", c.method},
            {"methods", c.methods},
            {"eta", c.eta},
            {"eta_grid", c.eta_grid},
            {"bootstrap", c.bootstrap},
            {"seed", c.seed},
            {"interval", c.interval},
            {"level", c.level},
            {"warm_start", c.warm_start},
            {"workers", c.workers},
            {"cells", c.cells},
            {"cell_policy", c.cell_policy},
            {"discrete_cells", c.discrete_cells},
            {"clip_eps", c.clip_eps},
            {"scenario", c.scenario},
            {"n", c.n},
            {"stream", c.stream},
            {"latent", c.latent},
            {"raw_outcome", c.raw_outcome},
            {"reps", c.reps},
            {"truth", c.truth ? json(*c.truth) : json(nullptr)},
            {"n_oracle", c.n_oracle},
            {"max_failure_rate", c.max_failure_rate},
            {"out", c.out}};
  return j;
}

std::vector<double> parse_grid(const std::vector<std::string>& items) {
  const auto to_double = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || !std::isfinite(v)) {
      throw Error(ErrorKind::InvalidInput, "grid value '" + s + "' is not a finite number", "config");
    }
    return v;
  };
  std::vector<double> out;
  if (items.size() == 1 && items[0].find(':') != std::string::npos) {
    const auto& s = items[0];
    const auto p1 = s.find(':');
    const auto p2 = s.find(':', p1 + 1);
    if (p2 == std::string::npos) {
      throw Error(ErrorKind::InvalidInput, "grid range must read lo:hi:count", "config");
    }
    const double lo = to_double(s.substr(0, p1));
    const double hi = to_double(s.substr(p1 + 1, p2 - p1 - 1));
    const double count = to_double(s.substr(p2 + 1));
    if (count < 1 || count != std::floor(count)) {
      throw Error(ErrorKind::InvalidInput, "grid count must be a positive integer", "config");
    }
    const int m = static_cast<int>(count);
    for (int i = 0; i < m; ++i) out.push_back(m == 1 ? lo : lo + (hi - lo) * i / (m - 1));
    return out;
  }
  for (const auto& s : items) out.push_back(to_double(s));
  return out;
}

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load(cfg);
  const FitReport r = estimate(ds, parse_method(cfg.method), estimator_config(cfg));
  const auto dir = prepare_out(cfg);
  json j = report_json(r, ds);
  j["config"] = to_json(cfg);
  j["n"] = ds.n();
  j["cell_summary"] = cell_summary_json(cell_summary(ds));
  write_json(dir / "report.json", j);
  auto txt = open_out(dir / "report.txt");
  write_report_text(txt, r, ds);
  fmt::print(log, "delta_hat {:.6f}", r.delta_hat);
  if (r.ci_low) fmt::print(log, "  CI [{:.6f}, {:.6f}]", *r.ci_low, *r.ci_high);
  fmt::print(log, "\nwrote {}\n", (dir / "report.json").string());
  return 0;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  DgpSpec spec;
  spec.scenario = parse_scenario(cfg.scenario, cfg.eta);
  spec.n = cfg.n.front();
  spec.seed = cfg.seed;
  spec.stream = cfg.stream;
  spec.emit_latent = cfg.latent;
  const Simulated sim = generate_latent(spec);

  std::vector<CsvExtraColumn> extras;
  if (cfg.raw_outcome) extras.push_back({cfg.raw_col, sim.y_raw});
  if (cfg.latent) {
    CsvExtraColumn stratum{"g", {}};
    CsvExtraColumn y_star{"y_star", {}};
    for (std::size_t i = 0; i < sim.stratum.size(); ++i) {
      stratum.values.emplace_back(static_cast<double>(static_cast<int>(sim.stratum[i])));
      y_star.values.push_back(sim.y_star[i] ? std::optional<double>(*sim.y_star[i]) : std::nullopt);
    }
    extras.push_back(std::move(stratum));
    extras.push_back(std::move(y_star));
  }
  const auto dir = prepare_out(cfg);
  write_csv_file(dir / "data.csv", sim.data, extras);
  fmt::print(log, "wrote {} rows to {}\n", sim.data.n(), (dir / "data.csv").string());
  return 0;
}

int cmd_mc(const RunConfig& cfg, std::ostream& log) {
  const Scenario scenario = parse_scenario(cfg.scenario, cfg.eta);
  const double truth = cfg.truth ? *cfg.truth : true_sace(scenario, cfg.n_oracle);
  std::vector<StudyResult> studies;
  for (std::size_t n : cfg.n) {
    StudyConfig sc;
    sc.scenario = scenario;
    sc.n = n;
    sc.methods = study_methods(cfg);
    sc.reps = cfg.reps;
    sc.bootstrap = cfg.bootstrap;
    sc.master_seed = cfg.seed;
    sc.truth = truth;
    sc.workers = cfg.workers;
    sc.max_failure_rate = cfg.max_failure_rate;
    sc.estimator = estimator_config(cfg);
    sc.estimator.eta = 0.0;  // the working model never knows the generating offset
    sc.estimator.diagnostics = false;
    fmt::print(log, "n={} reps={} B={}\n", n, cfg.reps, cfg.bootstrap);
    studies.push_back(monte_carlo_study(sc));
  }
  const auto dir = prepare_out(cfg);
  {
    auto f = open_out(dir / "table.csv");
    write_study_table(f, studies);
  }
  {
    auto f = open_out(dir / "replicates.csv");
    write_study_replicates(f, studies);
  }
  write_json(dir / "report.json", {{"config", to_json(cfg)}, {"scenario", scenario.name()}, {"truth", truth}});
  write_study_table(log, studies);
  return 0;
}

int cmd_bounds(const RunConfig& cfg, std::ostream& log) {
  const Dataset ds = load(cfg);
  const CellSpec spec = cell_spec(cfg);
  const ModelData data = prepare(ds);
  const auto columns = resolve_columns(ds, spec.columns);
  const CellTable table = build_cells(data, columns, spec);
  BoundsResult adjusted = adjusted_bounds(table);
  BoundsResult unadjusted = unadjusted_bounds(data);
  if (cfg.bootstrap > 0) {
    bootstrap_bounds(adjusted, data, columns, spec, cfg.bootstrap, cfg.seed, cfg.level, cfg.workers);
    CellSpec none;
    none.clip_eps = spec.clip_eps;
    bootstrap_bounds(unadjusted, data, {}, none, cfg.bootstrap, cfg.seed, cfg.level, cfg.workers);
    unadjusted.variant = BoundsVariant::Unadjusted;
  }
  const auto dir = prepare_out(cfg);
  {
    auto f = open_out(dir / "bounds.csv");
    f << "variant,lower,upper,width,lower_ci_low,lower_ci_high,upper_ci_low,upper_ci_high,cells,clipped,"
         "merged,dropped\n";
    bounds_row(f, adjusted);
    bounds_row(f, unadjusted);
  }
  json thresholds = json::array();
  for (double t : table.thresholds) thresholds.push_back(num(t));
  write_json(dir / "report.json", {{"config", to_json(cfg)},
                                   {"cell_columns", spec.columns},
                                   {"thresholds", thresholds},
                                   {"adjusted", bounds_json(adjusted)},
                                   {"unadjusted", bounds_json(unadjusted)}});
  fmt::print(log, "adjusted   [{:.6f}, {:.6f}]\nunadjusted [{:.6f}, {:.6f}]\n", adjusted.lower,
             adjusted.upper, unadjusted.lower, unadjusted.upper);
  for (const auto& d : adjusted.diagnostics) fmt::print(log, "note: {}\n", d);
  return 0;
}

int cmd_bounds_study(const RunConfig& cfg, std::ostream& log) {
  BoundsStudyConfig bc;
  bc.scenario = parse_scenario(cfg.scenario, cfg.eta);
  bc.n = cfg.n.front();
  bc.reps = cfg.reps;
  bc.master_seed = cfg.seed;
  bc.workers = cfg.workers;
  const auto records = bounds_study(bc);
  const auto dir = prepare_out(cfg);
  {
    auto f = open_out(dir / "bounds_replicates.csv");
    write_bounds_replicates(f, records);
  }
  write_json(dir / "report.json", {{"config", to_json(cfg)}, {"scenario", bc.scenario.name()}});
  int ok = 0;
  for (const auto& r : records) ok += r.ok;
  fmt::print(log, "{} of {} replicates succeeded\n", ok, records.size());
  return 0;
}

int cmd_sensitivity(const RunConfig& cfg, std::ostream& log) {
  if (cfg.eta_grid.empty()) throw Error(ErrorKind::InvalidInput, "--eta-grid is required", "config");
  const Dataset ds = load(cfg);
  const auto curve = sensitivity_curve(ds, cfg.eta_grid, estimator_config(cfg));
  const auto dir = prepare_out(cfg);
  auto f = open_out(dir / "sensitivity.csv");
  f << "eta,delta_hat,ci_low,ci_high,treated_mean,control_mean,bootstrap_failed,error\n";
  for (const auto& pt : curve) {
    f << format_real(pt.eta) << ',';
    if (pt.report) {
      const auto& r = *pt.report;
      f << format_real(r.delta_hat) << ',' << opt_real(r.ci_low) << ',' << opt_real(r.ci_high) << ','
        << format_real(r.treated_mean) << ',' << format_real(r.control_mean) << ',' << r.bootstrap_failed
        << ",\n";
    } else {
      f << ",,,,,," << csv_text(pt.error) << '\n';
    }
  }
  write_json(dir / "report.json", {{"config", to_json(cfg)}});
  fmt::print(log, "wrote {} points to {}\n", curve.size(), (dir / "sensitivity.csv").string());
  return 0;
}

int cmd_threshold_sweep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.kappa_grid.empty()) throw Error(ErrorKind::InvalidInput, "--kappa-grid is required", "config");
  if (cfg.input.empty()) throw Error(ErrorKind::InvalidInput, "--input is required", "input");
  const CsvTable table = read_csv_table(cfg.input);
  if (!table.column(cfg.raw_col)) {
    throw Error(ErrorKind::Schema, "raw outcome column '" + cfg.raw_col + "' not found", "input");
  }
  const Method method = parse_method(cfg.method);
  const EstimatorConfig ecfg = estimator_config(cfg);
  const auto dir = prepare_out(cfg);
  auto f = open_out(dir / "sweep.csv");
  f << "kappa,observed,proportion_y1,delta_hat,ci_low,ci_high,error\n";
  for (double kappa : cfg.kappa_grid) {
    const Dataset ds = to_dataset(table, csv_options(cfg, kappa));
    std::size_t observed = 0, positive = 0;
    for (const auto& rec : ds) {
      if (rec.s == 1 && rec.r == 1) {
        ++observed;
        positive += *rec.y == 1;
      }
    }
    const double share = observed ? static_cast<double>(positive) / static_cast<double>(observed) : 0.0;
    f << format_real(kappa) << ',' << observed << ',' << format_real(share) << ',';
    try {
      const auto r = estimate(ds, method, ecfg);
      f << format_real(r.delta_hat) << ',' << opt_real(r.ci_low) << ',' << opt_real(r.ci_high) << ",\n";
    } catch (const Error& e) {
      f << ",,," << csv_text(e.what()) << '\n';
    }
  }
  write_json(dir / "report.json", {{"config", to_json(cfg)}});
  fmt::print(log, "wrote {} thresholds to {}\n", cfg.kappa_grid.size(), (dir / "sweep.csv").string());
  return 0;
}

namespace {

// Flat JSON object whose keys are long flag names ('_' or '-').
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& results = opt->results();
      if (results.empty() && !default_also) continue;
      const std::string name = opt->get_lnames().front();
      if (results.size() > 1 || opt->get_expected_max() > 1) {
        j[name] = results;
      } else if (!results.empty()) {
        j[name] = results.front();
      } else {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = key;
      std::replace(item.name.begin(), item.name.end(), '_', '-');
      const auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_null()) continue;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Survivor average causal effect estimation with outcomes missing not at random"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file of flag values; flags given on the command line win");
  app.require_subcommand(1);

  RunConfig cfg;
  std::vector<std::string> eta_grid, kappa_grid;
  std::optional<double> truth, kappa;

  app.add_option("--input", cfg.input, "Input CSV");
  app.add_option("--a-col", cfg.a_col, "Proxy column")->capture_default_str();
  app.add_option("--c-cols", cfg.c_cols, "Covariate columns (default: all non-reserved)")->delimiter(',');
  app.add_option("--raw-col", cfg.raw_col, "Raw continuous outcome column")->capture_default_str();
  app.add_option("--kappa", kappa, "Binarize the raw outcome as 1(raw > kappa)");
  app.add_option("--kappa-grid", kappa_grid, "Thresholds: list or lo:hi:count")->delimiter(',');
  app.add_option("--method", cfg.method, "proposed, naive or ignore-mnar")->capture_default_str();
  app.add_option("--methods", cfg.methods, "Methods for mc (default: all)")->delimiter(',');
  app.add_option("--eta", cfg.eta, "Sensitivity offset")->capture_default_str();
  app.add_option("--eta-grid", eta_grid, "Offsets: list or lo:hi:count")->delimiter(',');
  app.add_option("--bootstrap", cfg.bootstrap, "Bootstrap replicates (0 skips)")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", cfg.seed, "Seed")->capture_default_str();
  app.add_option("--interval", cfg.interval, "percentile or normal")->capture_default_str();
  app.add_option("--level", cfg.level, "Interval level")->capture_default_str()->check(CLI::Range(0.5, 0.9999));
  app.add_option("--warm-start", cfg.warm_start, "Warm-start bootstrap refits")->capture_default_str();
  app.add_option("--workers", cfg.workers, "Threads (0 = hardware)")->capture_default_str();
  app.add_option("--cells", cfg.cells, "Cell columns as name[:threshold]")->delimiter(',');
  app.add_option("--cell-policy", cfg.cell_policy, "merge, drop or fail")->capture_default_str();
  app.add_flag("--discrete-cells", cfg.discrete_cells, "Use raw covariate values as cell levels");
  app.add_option("--clip-eps", cfg.clip_eps, "Lower clip for the survival ratio")->capture_default_str();
  app.add_option("--scenario", cfg.scenario, "base, mixed_cov, bounds_violation, sensitivity:<eta>")
      ->capture_default_str();
  app.add_option("--n", cfg.n, "Sample size(s)")->delimiter(',')->capture_default_str();
  app.add_option("--stream", cfg.stream, "Stream index for simulate")->capture_default_str();
  app.add_flag("--latent", cfg.latent, "simulate: add stratum code g (0 always, 1 protected, 2 never) and y_star");
  app.add_flag("--raw-outcome", cfg.raw_outcome, "simulate: add the raw continuous outcome column");
  app.add_option("--reps", cfg.reps, "Monte Carlo replicates")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--truth", truth, "Known true effect (default: oracle)");
  app.add_option("--n-oracle", cfg.n_oracle, "Oracle Monte Carlo size")->capture_default_str();
  app.add_option("--max-failure-rate", cfg.max_failure_rate, "Allowed failed replicate share")
      ->capture_default_str();
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"fit", "Estimate the effect and write report.json and report.txt"},
      {"simulate", "Draw a dataset from a simulation scenario into data.csv"},
      {"mc", "Monte Carlo study writing table.csv and replicates.csv"},
      {"bounds", "Adjusted and unadjusted bounds into bounds.csv"},
      {"bounds-study", "Repeated bounds on a scenario into bounds_replicates.csv"},
      {"sensitivity", "Estimates over an offset grid into sensitivity.csv"},
      {"threshold-sweep", "Estimates over outcome thresholds into sweep.csv"},
  };
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough()->callback([&cfg, name = name] { cfg.command = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    cfg.truth = truth;
    cfg.kappa = kappa;
    if (!eta_grid.empty()) cfg.eta_grid = parse_grid(eta_grid);
    if (!kappa_grid.empty()) cfg.kappa_grid = parse_grid(kappa_grid);
    if (cfg.n.empty()) throw Error(ErrorKind::InvalidInput, "--n needs a value", "config");
    if (cfg.command == "fit") return cmd_fit(cfg, out);
    if (cfg.command == "simulate") return cmd_simulate(cfg, out);
    if (cfg.command == "mc") return cmd_mc(cfg, out);
    if (cfg.command == "bounds") return cmd_bounds(cfg, out);
    if (cfg.command == "bounds-study") return cmd_bounds_study(cfg, out);
    if (cfg.command == "sensitivity") return cmd_sensitivity(cfg, out);
    if (cfg.command == "threshold-sweep") return cmd_threshold_sweep(cfg, out);
    err << "error: unknown command\n";
    return 2;
  } catch (const Error& e) {
    err << "error " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error [" << cfg.command << "] " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sace::cli
