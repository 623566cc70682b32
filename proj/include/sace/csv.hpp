#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sace/core_data.hpp"

namespace sace {

// Column roles when turning a CSV table into a Dataset.
//
// Required columns: z, s, r, the proxy column (default "a") and either `y`
// or, when `kappa` is set, the raw continuous outcome column. Every other
// column that is not reserved becomes a C covariate unless `c_columns`
// selects them explicitly.
struct CsvOptions {
  std::string a_column = "a";
  std::optional<std::vector<std::string>> c_columns;
  std::optional<double> kappa;  // y = 1 iff raw outcome > kappa
  std::string raw_outcome_column = "y_raw";
};

// Header plus raw cells, kept so a table can be re-binarized cheaply.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv_table(const std::filesystem::path& path);

Dataset to_dataset(const CsvTable& table, const CsvOptions& options = {});
Dataset read_csv(std::istream& in, const CsvOptions& options = {});
Dataset read_csv_file(const std::filesystem::path& path, const CsvOptions& options = {});

// Raw outcome column values (empty when absent) for threshold sweeps.
std::vector<std::optional<double>> raw_outcome(const CsvTable& table,
                                               const std::string& column = "y_raw");

struct CsvExtraColumn {
  std::string name;
  std::vector<std::optional<double>> values;  // one per row, empty cell when absent
};

// Writes z,s,r,y,a,<covariates>[,extras]. Reals use the shortest
// representation that round-trips exactly.
void write_csv(std::ostream& out, const Dataset& dataset,
               const std::vector<CsvExtraColumn>& extras = {});
void write_csv_file(const std::filesystem::path& path, const Dataset& dataset,
                    const std::vector<CsvExtraColumn>& extras = {});

std::string format_real(double value);

}  // namespace sace
