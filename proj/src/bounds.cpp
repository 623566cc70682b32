#include "sace/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sace/error.hpp"
#include "sace/estimator.hpp"

namespace sace {

std::string_view to_string(BoundsVariant variant) noexcept {
  return variant == BoundsVariant::Adjusted ? "adjusted" : "unadjusted";
}

std::vector<Eigen::Index> resolve_columns(const Dataset& dataset,
                                          const std::vector<std::string>& names) {
  std::vector<Eigen::Index> out;
  const auto& cov = dataset.covariate_names();
  for (const auto& name : names) {
    if (name == "a") {
      out.push_back(1);
      continue;
    }
    const auto it = std::find(cov.begin(), cov.end(), name);
    if (it == cov.end()) {
      throw Error(ErrorKind::InvalidInput, "cell column '" + name + "' is not a covariate");
    }
    out.push_back(2 + static_cast<Eigen::Index>(it - cov.begin()));
  }
  return out;
}

namespace {

bool arms_complete(const Cell& c) {
  return c.size[0] > 0.0 && c.size[1] > 0.0 && c.survivors[0] > 0.0 && c.survivors[1] > 0.0;
}

int hamming(const std::vector<double>& a, const std::vector<double>& b) {
  int d = 0;
  for (std::size_t j = 0; j < a.size(); ++j) d += a[j] != b[j];
  return d;
}

void absorb(Cell& into, const Cell& from) {
  for (int z : {0, 1}) {
    into.size[z] += from.size[z];
    into.survivors[z] += from.survivors[z];
    into.observed[z] += from.observed[z];
    into.positive[z] += from.positive[z];
  }
}

std::string describe(const std::vector<double>& key) {
  std::string out = "(";
  for (std::size_t j = 0; j < key.size(); ++j) {
    if (j) out += ",";
    const double v = key[j];
    out += v == std::floor(v) ? std::to_string(static_cast<long long>(v)) : std::to_string(v);
  }
  return out + ")";
}

void handle_empty_arms(CellTable& table, EmptyCellPolicy policy) {
  for (;;) {
    const auto bad = std::find_if(table.cells.begin(), table.cells.end(),
                                  [](const Cell& c) { return !arms_complete(c); });
    if (bad == table.cells.end()) return;
    if (table.cells.size() == 1) {
      throw Error(ErrorKind::EmptyArm, "a treatment arm has no rows or no survivors");
    }
    const std::string where = describe(bad->key);
    if (policy == EmptyCellPolicy::Fail) {
      throw Error(ErrorKind::EmptyArmInCell, "cell " + where + " lacks an arm or its survivors");
    }
    if (policy == EmptyCellPolicy::DropReweight) {
      table.diagnostics.push_back("dropped cell " + where + " (empty arm)");
      table.cells.erase(bad);
      ++table.dropped;
      continue;
    }
    std::size_t best = table.cells.size();
    int best_distance = 0;
    double best_size = -1.0;
    for (std::size_t i = 0; i < table.cells.size(); ++i) {
      if (&table.cells[i] == &*bad) continue;
      const int d = hamming(table.cells[i].key, bad->key);
      const double size = table.cells[i].size[0] + table.cells[i].size[1];
      if (best == table.cells.size() || d < best_distance ||
          (d == best_distance && size > best_size)) {
        best = i;
        best_distance = d;
        best_size = size;
      }
    }
    absorb(table.cells[best], *bad);
    table.diagnostics.push_back("merged cell " + where + " into " + describe(table.cells[best].key));
    table.cells.erase(bad);
    ++table.merged;
  }
}

}  // namespace

CellTable build_cells(const ModelData& data, const std::vector<Eigen::Index>& columns,
                      const CellSpec& spec) {
  if (!spec.thresholds.empty() && spec.thresholds.size() != columns.size()) {
    throw Error(ErrorKind::InvalidInput, "one threshold per cell column required");
  }
  if (!(spec.clip_eps > 0.0 && spec.clip_eps < 1.0)) {
    throw Error(ErrorKind::InvalidInput, "clip_eps must lie in (0,1)");
  }
  CellTable table;
  table.total = data.total_weight();
  if (!(table.total > 0.0)) throw Error(ErrorKind::InvalidInput, "no rows to build cells from");

  if (!spec.discrete) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const auto col = columns[j];
      if (col < 1 || col >= data.x.cols()) throw Error(ErrorKind::InvalidInput, "cell column out of range");
      if (!spec.thresholds.empty() && spec.thresholds[j]) {
        table.thresholds.push_back(*spec.thresholds[j]);
      } else {
        table.thresholds.push_back((data.weight * data.x.col(col).array()).sum() / table.total);
      }
    }
  }

  std::map<std::vector<double>, Cell> by_key;
  std::vector<double> key(columns.size());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double w = data.weight(i);
    if (w == 0.0) continue;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const double v = data.x(i, columns[j]);
      key[j] = spec.discrete ? v : (v < table.thresholds[j] ? 1.0 : 0.0);
    }
    Cell& cell = by_key[key];
    const auto z = static_cast<int>(data.z(i));
    cell.size[z] += w;
    if (data.s(i) == 1.0) {
      cell.survivors[z] += w;
      if (data.r(i) == 1.0) {
        cell.observed[z] += w;
        cell.positive[z] += w * data.y(i);
      }
    }
  }
  for (auto& [k, cell] : by_key) {
    cell.key = k;
    table.cells.push_back(cell);
  }

  handle_empty_arms(table, spec.policy);

  double mass_total = 0.0;
  for (const auto& c : table.cells) mass_total += c.size[0] + c.size[1];
  double phi_norm = 0.0;
  for (auto& c : table.cells) {
    c.mass = (c.size[0] + c.size[1]) / mass_total;
    const double s1 = c.survivors[1] / c.size[1];
    c.survival_control = c.survivors[0] / c.size[0];
    c.gamma_raw = c.survival_control / s1;
    c.gamma = std::clamp(c.gamma_raw, spec.clip_eps, 1.0);
    c.clipped = c.gamma != c.gamma_raw;
    if (c.clipped) {
      ++table.clipped;
      table.diagnostics.push_back("survival ratio " + std::to_string(c.gamma_raw) + " clipped in cell " +
                                  describe(c.key));
    }
    for (int z : {0, 1}) {
      c.delta[z] = c.observed[z] / c.survivors[z];
      c.xi[z] = c.observed[z] > 0.0 ? c.positive[z] / c.observed[z] : 0.0;
    }
    phi_norm += c.survival_control * c.mass;
  }
  for (auto& c : table.cells) c.phi = c.survival_control / phi_norm;
  table.columns.reserve(columns.size());
  for (auto col : columns) {
    table.columns.push_back(col == 1 ? "a" : "c" + std::to_string(col - 1));
  }
  return table;
}

CellTable build_cells(const Dataset& dataset, const CellSpec& spec) {
  const ModelData data = prepare(dataset);
  CellTable table = build_cells(data, resolve_columns(dataset, spec.columns), spec);
  table.columns = spec.columns;
  return table;
}

Interval cell_bounds(double gamma, double delta1, double delta0, double xi11, double xi01) {
  const double treated_low = delta1 * xi11;
  const double treated_high = delta1 * xi11 + 1.0 - delta1;
  const double control_low = delta0 * xi01;
  const double control_high = delta0 * xi01 + 1.0 - delta0;
  Interval out;
  out.lower = std::max(0.0, treated_low / gamma - (1.0 - gamma) / gamma) - control_high;
  out.upper = std::min(1.0, treated_high / gamma) - control_low;
  return out;
}

BoundsResult adjusted_bounds(const CellTable& cells) {
  BoundsResult res;
  res.variant = BoundsVariant::Adjusted;
  for (const auto& c : cells.cells) {
    const Interval b = cell_bounds(c.gamma, c.delta[1], c.delta[0], c.xi[1], c.xi[0]);
    const double w = c.mass * c.phi;
    res.lower += w * b.lower;
    res.upper += w * b.upper;
    res.cells.push_back({c.key, w, b.lower, b.upper});
  }
  res.clipped = cells.clipped;
  res.merged = cells.merged;
  res.dropped = cells.dropped;
  res.diagnostics = cells.diagnostics;
  return res;
}

BoundsResult unadjusted_bounds(const ModelData& data) {
  BoundsResult res = adjusted_bounds(build_cells(data, {}, CellSpec{}));
  res.variant = BoundsVariant::Unadjusted;
  return res;
}

BoundsResult unadjusted_bounds(const Dataset& dataset) { return unadjusted_bounds(prepare(dataset)); }

void bootstrap_bounds(BoundsResult& result, const ModelData& data,
                      const std::vector<Eigen::Index>& columns, const CellSpec& spec, int B,
                      std::uint64_t seed, double level, unsigned workers) {
  const auto endpoint = [&](bool upper) {
    return [&, upper](const ModelData& d) {
      const auto r = adjusted_bounds(build_cells(d, columns, spec));
      return upper ? r.upper : r.lower;
    };
  };
  const auto lo = bootstrap_ci(data, endpoint(false), B, seed, IntervalKind::Percentile, level, workers);
  const auto hi = bootstrap_ci(data, endpoint(true), B, seed, IntervalKind::Percentile, level, workers);
  result.lower_ci = std::array<double, 2>{lo.low, lo.high};
  result.upper_ci = std::array<double, 2>{hi.low, hi.high};
  result.bootstrap = B;
  result.bootstrap_failed = std::max(lo.failed, hi.failed);
}

}  // namespace sace
