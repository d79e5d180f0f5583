#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "flowact/core/normalizer.hpp"
#include "flowact/episode.hpp"

namespace flowact {

struct CleaningThresholds {
  double variance_floor = 1e-6;  // normalized units
  double len_min = 2.0;
  double len_max = 1e9;
  const NormalizerStats* stats = nullptr;  // per-dim scale for the variance test
};

struct CleanResult {
  bool accept = true;
  std::string reason;  // corrupted | near-zero-variance | length-outlier
};

// Robust bounds on episode length: z-score on log-length with median/MAD.
inline void length_bounds_from_corpus(const std::vector<int>& lengths, double z_bound,
                                      double& len_min, double& len_max) {
  if (lengths.empty()) {
    len_min = 2.0;
    len_max = 1e9;
    return;
  }
  std::vector<double> logs;
  for (int l : lengths) logs.push_back(std::log(std::max(1, l)));
  std::vector<double> s = logs;
  std::sort(s.begin(), s.end());
  double med = s[s.size() / 2];
  std::vector<double> dev;
  for (double v : logs) dev.push_back(std::abs(v - med));
  std::sort(dev.begin(), dev.end());
  double mad = std::max(dev[dev.size() / 2], 0.08);  // floor keeps uniform corpora permissive
  double sigma = 1.4826 * mad;
  len_min = std::exp(med - z_bound * sigma);
  len_max = std::exp(med + z_bound * sigma);
}

// Filters in priority order: corrupted payloads, static recordings
// (near-zero variance on every action channel), anomalous lengths.
inline CleanResult clean_episode(const Episode& ep, const CleaningThresholds& th) {
  for (float v : ep.states)
    if (!std::isfinite(v)) return {false, "corrupted"};
  for (float v : ep.actions)
    if (!std::isfinite(v)) return {false, "corrupted"};

  const int T = ep.num_actions();
  const int d = ep.action_dim;
  if (T >= 1 && d >= 1) {
    bool any_live = false;
    for (int k = 0; k < d; ++k) {
      double mean = 0.0;
      for (int t = 0; t < T; ++t) mean += ep.action_row(t)[k];
      mean /= T;
      double var = 0.0;
      for (int t = 0; t < T; ++t) {
        double dev = ep.action_row(t)[k] - mean;
        var += dev * dev;
      }
      var /= T;
      if (th.stats && k < th.stats->dim() && !th.stats->dims[k].constant) {
        double half_range = 0.5 * (th.stats->dims[k].q99 - th.stats->dims[k].q01);
        var /= half_range * half_range;
      }
      if (var >= th.variance_floor) {
        any_live = true;
        break;
      }
    }
    if (!any_live) return {false, "near-zero-variance"};
  }

  const int len = ep.num_states();
  if (len < th.len_min || len > th.len_max) return {false, "length-outlier"};
  return {true, ""};
}

}  // namespace flowact
