#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sace {

// Principal strata admitted under monotone survival. Defiers do not exist.
enum class Stratum {
  AlwaysSurvivor,   // survives under either arm
  Protected,        // survives only when treated
  NeverSurvivor,
};

inline constexpr std::array<Stratum, 3> kAllStrata = {
    Stratum::AlwaysSurvivor, Stratum::Protected, Stratum::NeverSurvivor};

std::string_view to_string(Stratum stratum) noexcept;

// One subject. `y` is empty whenever the outcome is missing (r = 0) or
// undefined (s = 0); the two cases are told apart through `s`.
struct ObservationRecord {
  int z = 0;
  int s = 0;
  int r = 0;
  std::optional<int> y;
  double a = 0.0;
  std::vector<double> c;
};

// Immutable collection of records sharing the covariate names in
// `covariate_names()`. Structural rules are reported by validate(), not
// enforced by the constructor, so malformed input can still be inspected.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<ObservationRecord> records,
          std::vector<std::string> covariate_names);

  std::size_t n() const noexcept { return records_.size(); }
  std::size_t k() const noexcept { return covariate_names_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const ObservationRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<ObservationRecord>& records() const noexcept { return records_; }
  const std::vector<std::string>& covariate_names() const noexcept {
    return covariate_names_;
  }

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  // Rows in the given order; indices may repeat (bootstrap resampling).
  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<ObservationRecord> records_;
  std::vector<std::string> covariate_names_;
};

struct Violation {
  std::optional<std::size_t> row;  // empty for dataset-level rules
  std::string rule;
  std::string message;
};

// Empty iff every record- and dataset-level invariant holds.
std::vector<Violation> validate(const Dataset& dataset);

// Throws Error(InvalidInput) listing the first few violations.
void require_valid(const Dataset& dataset);

struct CellSummaryRow {
  int z = 0;
  int s = 0;
  int r = 0;
  std::size_t count = 0;
  std::vector<double> mean;  // A first, then each C column
  std::vector<double> sd;
  std::optional<double> y_mean;
};

struct CellSummary {
  std::vector<std::string> columns;  // "a", then the covariate names
  std::vector<CellSummaryRow> rows;  // observed (z, s, r) patterns only
  std::vector<std::array<int, 3>> empty_patterns;  // admissible but unobserved
  std::array<double, 2> survival_rate{};           // indexed by z
  std::array<std::size_t, 2> arm_size{};
};

// The six admissible (z, s, r) patterns in reporting order.
inline constexpr std::array<std::array<int, 3>, 6> kAdmissiblePatterns = {{
    {1, 1, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 0}, {1, 1, 1}, {0, 1, 1},
}};

CellSummary cell_summary(const Dataset& dataset);

}  // namespace sace
