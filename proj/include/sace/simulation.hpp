#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sace/bounds.hpp"
#include "sace/core_data.hpp"
#include "sace/estimator.hpp"

namespace sace {

enum class ScenarioKind { Base, MixedCov, Sensitivity, BoundsViolation };

struct Scenario {
  ScenarioKind kind = ScenarioKind::Base;
  double eta = 0.0;  // sensitivity scenario only

  static Scenario base() { return {}; }
  static Scenario mixed_cov() { return {ScenarioKind::MixedCov, 0.0}; }
  static Scenario sensitivity(double eta) { return {ScenarioKind::Sensitivity, eta}; }
  static Scenario bounds_violation() { return {ScenarioKind::BoundsViolation, 0.0}; }

  std::string name() const;
};

// "base", "mixed_cov", "bounds_violation", "sensitivity" (eta from the
// second argument) or "sensitivity:<eta>".
Scenario parse_scenario(const std::string& text, double eta = 0.0);

struct DgpSpec {
  Scenario scenario;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;  // rows are drawn from stream (seed, stream)
  bool emit_latent = false;
};

// Per-row model probabilities of one scenario at covariates (a, c).
struct DgpModel {
  Scenario scenario;

  double survival_treated(double a, double c) const;
  double survival_ratio(double a, double c) const;
  double outcome(int z, Stratum g, double a, double c) const;  // pr(Y* = 1)
  double response(int z, double a, double c, int y) const;     // pr(R = 1 | S = 1)
};

struct Simulated {
  Dataset data;
  std::vector<Stratum> stratum;               // filled when emit_latent
  std::vector<std::optional<int>> y_star;     // drawn only for readable cells
  std::vector<std::optional<double>> y_raw;   // latent continuous outcome, observed rows only
};

// Y* is drawn as 1{lin + L > 0} with L standard logistic, so `y_raw`
// thresholded at 0 reproduces the binary outcome exactly.
Simulated generate_latent(const DgpSpec& spec);
Dataset generate(const DgpSpec& spec);

// Monte Carlo integral of the always-survivor weighted outcome contrast.
double true_sace(const Scenario& scenario, std::size_t n_oracle, std::uint64_t seed = 7);

// Monte Carlo pr(G = always survivor).
double always_survivor_share(const Scenario& scenario, std::size_t n_oracle, std::uint64_t seed = 7);

struct MethodSummary {
  Method method = Method::Proposed;
  int replicates = 0;  // successful
  int failed = 0;
  double mean_estimate = 0.0;
  double bias100 = 0.0;
  double rmse100 = 0.0;
  double coverage100 = 0.0;
  double mean_width = 0.0;
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  Method method = Method::Proposed;
  bool ok = false;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::string error;
};

struct StudyConfig {
  Scenario scenario;
  std::size_t n = 2000;
  std::vector<Method> methods{Method::Proposed};
  int reps = 100;
  int bootstrap = 200;
  std::uint64_t master_seed = 1;
  std::optional<double> truth;   // computed by the oracle when empty
  std::size_t n_oracle = 1000000;
  unsigned workers = 0;
  double max_failure_rate = 0.05;
  EstimatorConfig estimator;     // eta, solver and interval settings
};

struct StudyResult {
  Scenario scenario;
  std::size_t n = 0;
  int reps = 0;
  int bootstrap = 0;
  std::uint64_t master_seed = 0;
  double truth = 0.0;
  std::vector<MethodSummary> rows;
  std::vector<ReplicateRecord> replicates;
};

// Replicate r (1-based) draws its data from stream (master_seed, r); its
// bootstrap seed is derived from the same pair. Throws TooManyFailures when a
// method fails in more than max_failure_rate of replicates.
StudyResult monte_carlo_study(const StudyConfig& cfg);

struct BoundsRecord {
  std::size_t replicate = 0;
  bool ok = false;
  double unadjusted_lower = 0.0;
  double adjusted_lower = 0.0;
  std::optional<double> estimate;  // empty when the point fit failed
  double adjusted_upper = 0.0;
  double unadjusted_upper = 0.0;
  std::string error;
};

struct BoundsStudyConfig {
  Scenario scenario = Scenario::bounds_violation();
  std::size_t n = 2000;
  int reps = 100;
  std::uint64_t master_seed = 1;
  bool point_estimate = true;
  unsigned workers = 0;
};

// Cells are {1(C1 < 0), 1(A < 0)} as in the binarized design.
std::vector<BoundsRecord> bounds_study(const BoundsStudyConfig& cfg);

void write_study_table(std::ostream& out, const std::vector<StudyResult>& studies);
void write_study_replicates(std::ostream& out, const std::vector<StudyResult>& studies);
void write_bounds_replicates(std::ostream& out, const std::vector<BoundsRecord>& records);

}  // namespace sace
