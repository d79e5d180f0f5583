#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flowact/common.hpp"

namespace flowact {

// Per-dimension 1st/99th percentile stats for one dataset.
struct DimStats {
  double q01 = 0.0;
  double q99 = 0.0;
  bool constant = false;
};

struct NormalizerStats {
  std::string dataset_id;
  std::vector<DimStats> dims;
  bool low_sample = false;  // fewer than 100 samples: min/max fallback used

  int dim() const { return static_cast<int>(dims.size()); }
};

// Linear-interpolated order statistic at probability p (numpy "linear").
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  double pos = p * static_cast<double>(n - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, n - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline NormalizerStats fit_normalizer(const std::vector<std::vector<double>>& actions,
                                      const std::string& dataset_id) {
  if (actions.empty())
    raise(ErrorKind::invalid_argument, "fit_normalizer: empty input for " + dataset_id);
  const std::size_t d = actions[0].size();
  for (const auto& a : actions) {
    if (a.size() != d)
      raise(ErrorKind::invalid_argument, "fit_normalizer: ragged action vectors");
    for (double v : a)
      if (!std::isfinite(v)) raise(ErrorKind::data_error, "fit_normalizer: NaN/Inf in " + dataset_id);
  }

  NormalizerStats stats;
  stats.dataset_id = dataset_id;
  stats.low_sample = actions.size() < 100;
  if (stats.low_sample)
    std::fprintf(stderr, "[normalizer] %s: only %zu samples, falling back to min/max\n",
                 dataset_id.c_str(), actions.size());

  std::vector<double> col(actions.size());
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < actions.size(); ++i) col[i] = actions[i][k];
    std::sort(col.begin(), col.end());
    DimStats ds;
    if (stats.low_sample) {
      ds.q01 = col.front();
      ds.q99 = col.back();
    } else {
      ds.q01 = percentile_sorted(col, 0.01);
      ds.q99 = percentile_sorted(col, 0.99);
    }
    if (ds.q01 == ds.q99) ds.constant = true;
    stats.dims.push_back(ds);
  }
  return stats;
}

// a_d -> clip(2 (a_d - q01) / (q99 - q01) - 1, [-1, 1]); constant dims map to 0.
inline std::vector<double> normalize_actions(const std::vector<double>& a,
                                             const NormalizerStats& stats) {
  if (static_cast<int>(a.size()) != stats.dim())
    raise(ErrorKind::invalid_argument, "normalize_actions: dimension mismatch");
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const DimStats& ds = stats.dims[k];
    if (ds.constant) {
      out[k] = 0.0;
    } else {
      double v = 2.0 * (a[k] - ds.q01) / (ds.q99 - ds.q01) - 1.0;
      out[k] = std::min(1.0, std::max(-1.0, v));
    }
  }
  return out;
}

// Exact inverse on the open interval (q01, q99); constant dims recover the
// stored constant.
inline std::vector<double> denormalize_actions(const std::vector<double>& x,
                                               const NormalizerStats& stats) {
  if (static_cast<int>(x.size()) != stats.dim())
    raise(ErrorKind::invalid_argument, "denormalize_actions: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const DimStats& ds = stats.dims[k];
    out[k] = ds.constant ? ds.q01 : ds.q01 + 0.5 * (x[k] + 1.0) * (ds.q99 - ds.q01);
  }
  return out;
}

// ---- plain-text persistence: one row per (dataset, dim) -------------------
// Columns: dataset_id dim q01 q99 constant_flag, 17 significant digits.

class NormalizerTable {
 public:
  void put(const NormalizerStats& s) { table_[s.dataset_id] = s; }

  bool has(const std::string& dataset_id) const { return table_.count(dataset_id) > 0; }

  const NormalizerStats& get(const std::string& dataset_id) const {
    auto it = table_.find(dataset_id);
    if (it == table_.end())
      raise(ErrorKind::invalid_argument, "no normalizer stats for dataset " + dataset_id);
    return it->second;
  }

  std::string to_text() const {
    std::ostringstream os;
    char buf[128];
    for (const auto& [id, s] : table_) {
      for (int k = 0; k < s.dim(); ++k) {
        std::snprintf(buf, sizeof(buf), "%s\t%d\t%.17g\t%.17g\t%d\n", id.c_str(), k,
                      s.dims[k].q01, s.dims[k].q99, s.dims[k].constant ? 1 : 0);
        os << buf;
      }
    }
    return os.str();
  }

  static NormalizerTable from_text(const std::string& text) {
    NormalizerTable t;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string id;
      int dim, cflag;
      double q01, q99;
      if (!(ls >> id >> dim >> q01 >> q99 >> cflag))
        raise(ErrorKind::format_error,
              "normalizer table: bad row at line " + std::to_string(lineno));
      NormalizerStats& s = t.table_[id];
      s.dataset_id = id;
      if (static_cast<int>(s.dims.size()) <= dim) s.dims.resize(dim + 1);
      s.dims[dim] = {q01, q99, cflag != 0};
    }
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::io_error, "cannot write " + path);
    f << to_text();
  }

  static NormalizerTable load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::io_error, "cannot read " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return from_text(os.str());
  }

  const std::map<std::string, NormalizerStats>& entries() const { return table_; }

 private:
  std::map<std::string, NormalizerStats> table_;
};

}  // namespace flowact
