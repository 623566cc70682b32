#include "sace/csv.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "sace/error.hpp"

namespace sace {
namespace {

const std::set<std::string>& reserved_columns() {
  static const std::set<std::string> names = {"z", "s", "r", "y", "y_raw", "g", "y_star"};
  return names;
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void cell_error(std::size_t row, const std::string& column,
                             const std::string& what) {
  throw Error(ErrorKind::Schema, "row " + std::to_string(row + 1) + ", column '" +
                                     column + "': " + what);
}

int parse_int(const std::string& text, std::size_t row, const std::string& column) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) cell_error(row, column, "expected integer, got '" + text + "'");
  return value;
}

double parse_real(const std::string& text, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = text.data();
  if (!text.empty() && text.front() == '+') ++begin;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) cell_error(row, column, "expected real, got '" + text + "'");
  return value;
}

std::size_t require_column(const CsvTable& table, const std::string& name) {
  const auto idx = table.column(name);
  if (!idx) throw Error(ErrorKind::Schema, "missing required column '" + name + "'");
  return *idx;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorKind::Schema, "row " + std::to_string(table.rows.size() + 1) + " has " +
                                         std::to_string(fields.size()) + " fields, header has " +
                                         std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw Error(ErrorKind::Schema, "empty input: header row required");
  return table;
}

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open '" + path.string() + "'");
  return parse_csv(in);
}

std::vector<std::optional<double>> raw_outcome(const CsvTable& table,
                                               const std::string& column) {
  const auto idx = require_column(table, column);
  std::vector<std::optional<double>> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& cell = table.rows[i][idx];
    if (cell.empty()) {
      out.emplace_back();
    } else {
      out.emplace_back(parse_real(cell, i, column));
    }
  }
  return out;
}

Dataset to_dataset(const CsvTable& table, const CsvOptions& options) {
  const auto z_col = require_column(table, "z");
  const auto s_col = require_column(table, "s");
  const auto r_col = require_column(table, "r");
  const auto a_col = require_column(table, options.a_column);

  std::optional<std::size_t> y_col;
  std::vector<std::optional<double>> raw;
  if (options.kappa) {
    if (!table.column(options.raw_outcome_column)) {
      throw Error(ErrorKind::Schema, "kappa given but raw outcome column '" +
                                         options.raw_outcome_column + "' is missing");
    }
    raw = raw_outcome(table, options.raw_outcome_column);
  } else {
    if (!table.column("y") && table.column(options.raw_outcome_column)) {
      throw Error(ErrorKind::Schema, "only a raw outcome column '" + options.raw_outcome_column +
                                         "' is present; a threshold kappa is required");
    }
    y_col = require_column(table, "y");
  }

  std::vector<std::string> c_names;
  if (options.c_columns) {
    c_names = *options.c_columns;
  } else {
    for (const auto& name : table.header) {
      if (name == options.a_column || name == options.raw_outcome_column ||
          reserved_columns().count(name)) {
        continue;
      }
      c_names.push_back(name);
    }
  }
  std::vector<std::size_t> c_cols;
  for (const auto& name : c_names) {
    if (name == options.a_column) {
      throw Error(ErrorKind::Schema, "column '" + name + "' cannot be both A and a C covariate");
    }
    c_cols.push_back(require_column(table, name));
  }

  std::vector<ObservationRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    ObservationRecord rec;
    rec.z = parse_int(row[z_col], i, "z");
    rec.s = parse_int(row[s_col], i, "s");
    rec.r = parse_int(row[r_col], i, "r");
    if (options.kappa) {
      if (raw[i]) rec.y = *raw[i] > *options.kappa ? 1 : 0;
    } else if (!row[*y_col].empty()) {
      rec.y = parse_int(row[*y_col], i, "y");
    }
    rec.a = parse_real(row[a_col], i, options.a_column);
    rec.c.reserve(c_cols.size());
    for (std::size_t j = 0; j < c_cols.size(); ++j) {
      rec.c.push_back(parse_real(row[c_cols[j]], i, c_names[j]));
    }
    records.push_back(std::move(rec));
  }
  return Dataset(std::move(records), std::move(c_names));
}

Dataset read_csv(std::istream& in, const CsvOptions& options) {
  return to_dataset(parse_csv(in), options);
}

Dataset read_csv_file(const std::filesystem::path& path, const CsvOptions& options) {
  return to_dataset(read_csv_table(path), options);
}

std::string format_real(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

void write_csv(std::ostream& out, const Dataset& dataset,
               const std::vector<CsvExtraColumn>& extras) {
  out << "z,s,r,y,a";
  for (const auto& name : dataset.covariate_names()) out << ',' << name;
  for (const auto& extra : extras) out << ',' << extra.name;
  out << '\n';
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const auto& rec = dataset[i];
    out << rec.z << ',' << rec.s << ',' << rec.r << ',';
    if (rec.y) out << *rec.y;
    out << ',' << format_real(rec.a);
    for (double v : rec.c) out << ',' << format_real(v);
    for (const auto& extra : extras) {
      out << ',';
      if (i < extra.values.size() && extra.values[i]) out << format_real(*extra.values[i]);
    }
    out << '\n';
  }
}

void write_csv_file(const std::filesystem::path& path, const Dataset& dataset,
                    const std::vector<CsvExtraColumn>& extras) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
  write_csv(out, dataset, extras);
}

}  // namespace sace
