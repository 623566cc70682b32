#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sace/core_data.hpp"
#include "sace/model_data.hpp"

namespace sace {

enum class EmptyCellPolicy {
  Merge,         // fold into the nearest cell by pattern (Hamming), ties to the larger
  DropReweight,  // drop the cell and renormalize the cell masses
  Fail,          // throw EmptyArmInCell
};

// Which covariates define cells and how continuous values are cut.
// Column names are "a" for the proxy or a covariate name. A value x falls in
// level 1 when x < threshold; the default threshold is the sample mean.
struct CellSpec {
  std::vector<std::string> columns;
  std::vector<std::optional<double>> thresholds;  // empty or one per column
  bool discrete = false;                          // use raw values as levels
  EmptyCellPolicy policy = EmptyCellPolicy::Merge;
  double clip_eps = 1e-6;
};

struct Cell {
  std::vector<double> key;
  std::array<double, 2> size{};      // weighted rows per arm
  std::array<double, 2> survivors{};
  std::array<double, 2> observed{};  // survivors with observed outcome
  std::array<double, 2> positive{};  // observed outcomes equal to 1

  double mass = 0.0;         // estimated cell probability
  double gamma = 1.0;        // control / treated survival, clipped
  double gamma_raw = 1.0;
  std::array<double, 2> delta{};  // response rate among survivors
  std::array<double, 2> xi{};     // observed outcome mean among responders
  double survival_control = 0.0;
  double phi = 0.0;
  bool clipped = false;
};

struct CellTable {
  std::vector<std::string> columns;
  std::vector<double> thresholds;  // resolved, empty for discrete specs
  std::vector<Cell> cells;
  double total = 0.0;
  int clipped = 0;
  int merged = 0;
  int dropped = 0;
  std::vector<std::string> diagnostics;
};

// Column indices into ModelData::x (1 = proxy, 2 + j = covariate j).
std::vector<Eigen::Index> resolve_columns(const Dataset& dataset, const std::vector<std::string>& names);

CellTable build_cells(const ModelData& data, const std::vector<Eigen::Index>& columns,
                      const CellSpec& spec);
CellTable build_cells(const Dataset& dataset, const CellSpec& spec);

enum class BoundsVariant { Adjusted, Unadjusted };
std::string_view to_string(BoundsVariant variant) noexcept;

struct CellContribution {
  std::vector<double> key;
  double weight = 0.0;  // mass * phi
  double lower = 0.0;
  double upper = 0.0;
};

struct BoundsResult {
  BoundsVariant variant = BoundsVariant::Adjusted;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<CellContribution> cells;
  std::optional<std::array<double, 2>> lower_ci, upper_ci;
  int bootstrap = 0;
  int bootstrap_failed = 0;
  int clipped = 0;
  int merged = 0;
  int dropped = 0;
  std::vector<std::string> diagnostics;

  double width() const noexcept { return upper - lower; }
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Bounds inside one cell from its survival ratio, response rates and
// observed outcome means.
Interval cell_bounds(double gamma, double delta1, double delta0, double xi11, double xi01);

BoundsResult adjusted_bounds(const CellTable& cells);
BoundsResult unadjusted_bounds(const Dataset& dataset);
BoundsResult unadjusted_bounds(const ModelData& data);

// Endpoint percentile intervals by row resampling; cells are rebuilt in
// every replicate.
void bootstrap_bounds(BoundsResult& result, const ModelData& data,
                      const std::vector<Eigen::Index>& columns, const CellSpec& spec, int B,
                      std::uint64_t seed, double level = 0.95, unsigned workers = 0);

}  // namespace sace
