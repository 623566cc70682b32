#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sace::cli {

// Everything a command needs, after the config file and flags are merged.
struct RunConfig {
  std::string command;
  std::string input;
  std::string a_col = "a";
  std::vector<std::string> c_cols;  // empty: every non-reserved column
  std::string raw_col = "y_raw";
  std::optional<double> kappa;
  std::vector<double> kappa_grid;

  std::string method = "proposed";
  std::vector<std::string> methods;  // mc; defaults to all three
  double eta = 0.0;
  std::vector<double> eta_grid;
  int bootstrap = 200;
  std::uint64_t seed = 20240601;
  std::string interval = "percentile";
  double level = 0.95;
  bool warm_start = true;
  unsigned workers = 0;

  std::vector<std::string> cells;  // name or name:threshold
  std::string cell_policy = "merge";
  bool discrete_cells = false;
  double clip_eps = 1e-6;

  std::string scenario = "base";
  std::vector<std::size_t> n{2000};
  std::uint64_t stream = 0;
  bool latent = false;
  bool raw_outcome = false;
  int reps = 100;
  std::optional<double> truth;
  std::size_t n_oracle = 1000000;
  double max_failure_rate = 0.05;

  std::string out = ".";
};

nlohmann::json to_json(const RunConfig& cfg);

// "-2,-1,0" style lists pass through; a single "lo:hi:count" entry expands
// to an evenly spaced grid.
std::vector<double> parse_grid(const std::vector<std::string>& items);

int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_mc(const RunConfig& cfg, std::ostream& log);
int cmd_bounds(const RunConfig& cfg, std::ostream& log);
int cmd_bounds_study(const RunConfig& cfg, std::ostream& log);
int cmd_sensitivity(const RunConfig& cfg, std::ostream& log);
int cmd_threshold_sweep(const RunConfig& cfg, std::ostream& log);

// Parses arguments (argv[0] excluded), runs the command and returns the exit
// code. Pipeline errors print "error [stage] Kind: message" to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sace::cli
