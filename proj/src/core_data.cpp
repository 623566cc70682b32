#include "sace/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sace/error.hpp"

namespace sace {

std::string_view to_string(Stratum stratum) noexcept {
  switch (stratum) {
    case Stratum::AlwaysSurvivor: return "always_survivor";
    case Stratum::Protected: return "protected";
    case Stratum::NeverSurvivor: return "never_survivor";
  }
  return "unknown";
}

Dataset::Dataset(std::vector<ObservationRecord> records,
                 std::vector<std::string> covariate_names)
    : records_(std::move(records)), covariate_names_(std::move(covariate_names)) {}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<ObservationRecord> picked;
  picked.reserve(rows.size());
  for (std::size_t i : rows) picked.push_back(records_.at(i));
  return Dataset(std::move(picked), covariate_names_);
}

namespace {

bool is_binary(int v) { return v == 0 || v == 1; }

void add(std::vector<Violation>& out, std::optional<std::size_t> row,
         std::string rule, const std::string& what) {
  std::string message = what;
  if (row) message += " at row " + std::to_string(*row);
  out.push_back({row, std::move(rule), std::move(message)});
}

}  // namespace

std::vector<Violation> validate(const Dataset& dataset) {
  std::vector<Violation> out;
  const std::size_t k = dataset.k();
  std::array<std::size_t, 2> arm{};
  std::array<std::size_t, 2> survivors{};

  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const auto& rec = dataset[i];
    bool coded = true;
    if (!is_binary(rec.z)) { add(out, i, "z_binary", "z not in {0,1}"); coded = false; }
    if (!is_binary(rec.s)) { add(out, i, "s_binary", "s not in {0,1}"); coded = false; }
    if (!is_binary(rec.r)) { add(out, i, "r_binary", "r not in {0,1}"); coded = false; }
    if (rec.y && !is_binary(*rec.y)) add(out, i, "y_binary", "y not in {0,1}");
    if (rec.c.size() != k) add(out, i, "covariate_dimension", "covariate dimension differs from header");
    if (!std::isfinite(rec.a)) add(out, i, "finite_covariates", "non-finite a");
    for (double v : rec.c) {
      if (!std::isfinite(v)) {
        add(out, i, "finite_covariates", "non-finite covariate");
        break;
      }
    }
    if (!coded) continue;
    if (rec.s == 0 && rec.r == 1) add(out, i, "dead_unobserved", "r=1 with s=0");
    if (rec.r == 0 && rec.y) add(out, i, "missing_has_no_y", "y present with r=0");
    if (rec.r == 1 && rec.s == 1 && !rec.y) add(out, i, "observed_has_y", "y absent with r=1");
    ++arm[rec.z];
    if (rec.s == 1) ++survivors[rec.z];
  }

  for (int z : {0, 1}) {
    if (arm[z] == 0) {
      add(out, std::nullopt, "arm_nonempty", "treatment arm z=" + std::to_string(z) + " is empty");
    } else if (survivors[z] == 0) {
      add(out, std::nullopt, "arm_has_survivors", "no survivors in arm z=" + std::to_string(z));
    }
  }
  return out;
}

void require_valid(const Dataset& dataset) {
  const auto violations = validate(dataset);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << violations.size() << " data violation(s): ";
  for (std::size_t i = 0; i < violations.size() && i < 3; ++i) {
    if (i) msg << "; ";
    msg << violations[i].message;
  }
  throw Error(ErrorKind::InvalidInput, msg.str());
}

CellSummary cell_summary(const Dataset& dataset) {
  CellSummary out;
  out.columns.push_back("a");
  for (const auto& name : dataset.covariate_names()) out.columns.push_back(name);
  const std::size_t dim = out.columns.size();

  struct Accumulator {
    std::size_t count = 0;
    std::vector<double> sum, sum_sq;
    std::size_t y_count = 0;
    double y_sum = 0.0;
  };
  std::array<Accumulator, kAdmissiblePatterns.size()> acc;
  for (auto& a : acc) {
    a.sum.assign(dim, 0.0);
    a.sum_sq.assign(dim, 0.0);
  }

  std::array<std::size_t, 2> survivors{};
  for (const auto& rec : dataset) {
    if (rec.z == 0 || rec.z == 1) {
      ++out.arm_size[rec.z];
      if (rec.s == 1) ++survivors[rec.z];
    }
    for (std::size_t p = 0; p < kAdmissiblePatterns.size(); ++p) {
      const auto& pat = kAdmissiblePatterns[p];
      if (rec.z != pat[0] || rec.s != pat[1] || rec.r != pat[2]) continue;
      auto& a = acc[p];
      ++a.count;
      for (std::size_t j = 0; j < dim; ++j) {
        const double v = j == 0 ? rec.a : (j - 1 < rec.c.size() ? rec.c[j - 1] : 0.0);
        a.sum[j] += v;
        a.sum_sq[j] += v * v;
      }
      if (rec.y) {
        ++a.y_count;
        a.y_sum += *rec.y;
      }
      break;
    }
  }

  for (int z : {0, 1}) {
    out.survival_rate[z] = out.arm_size[z] == 0
                               ? 0.0
                               : static_cast<double>(survivors[z]) / out.arm_size[z];
  }

  for (std::size_t p = 0; p < kAdmissiblePatterns.size(); ++p) {
    const auto& a = acc[p];
    const auto& pat = kAdmissiblePatterns[p];
    if (a.count == 0) {
      out.empty_patterns.push_back(pat);
      continue;
    }
    CellSummaryRow row;
    row.z = pat[0];
    row.s = pat[1];
    row.r = pat[2];
    row.count = a.count;
    const double n = static_cast<double>(a.count);
    for (std::size_t j = 0; j < dim; ++j) {
      const double mean = a.sum[j] / n;
      row.mean.push_back(mean);
      // sample standard deviation; zero for singleton cells
      const double ss = a.sum_sq[j] - n * mean * mean;
      row.sd.push_back(a.count > 1 ? std::sqrt(std::max(0.0, ss) / (n - 1.0)) : 0.0);
    }
    if (a.y_count > 0) row.y_mean = a.y_sum / static_cast<double>(a.y_count);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace sace
