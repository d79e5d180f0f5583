#pragma once

#include <cmath>
#include <set>
#include <string>
#include <unordered_map>

#include "flowact/autodiff.hpp"
#include "flowact/policy/params.hpp"

namespace flowact {

using GradMap = std::unordered_map<std::string, Tensor>;

// Accumulates this tape's parameter gradients into the map.
inline void collect_grads(Tape& tape, const PolicyModel& m, GradMap& grads) {
  for (const auto& p : m.store.items()) {
    const Tensor* g = tape.grad_for(p.value);
    if (!g) continue;
    auto it = grads.find(p.name);
    if (it == grads.end())
      grads.emplace(p.name, *g);
    else
      it->second += *g;
  }
}

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  std::map<std::string, double> group_lr;  // group name -> base lr
  double lr_floor = 0.0;
  int total_steps = 1;  // cosine decay horizon
};

// Decoupled-weight-decay adaptive optimizer with per-group cosine schedules
// and global gradient-norm clipping. Parameters and moments live on the f32
// grid so checkpoints are lossless.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(std::move(cfg)) {}

  int step_count() const { return step_; }
  int skipped() const { return skipped_; }
  void set_step(int s) { step_ = s; }

  double lr_at(const std::string& group, int step) const {
    auto it = cfg_.group_lr.find(group);
    double base = it == cfg_.group_lr.end() ? 0.0 : it->second;
    if (cfg_.total_steps <= 0) return base;
    double t = std::min(1.0, static_cast<double>(step) / cfg_.total_steps);
    return cfg_.lr_floor + 0.5 * (base - cfg_.lr_floor) * (1.0 + std::cos(M_PI * t));
  }

  // Returns the pre-clip global gradient norm; NaN/Inf gradients skip the
  // step (logged by the caller via skipped()).
  double step(PolicyModel& m, GradMap& grads, const std::set<std::string>& frozen_groups) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
      for (double x : g.data) sq += x * x;
    double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) {
      ++skipped_;
      ++step_;
      return norm;
    }
    double scale = cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip ? cfg_.grad_clip / norm : 1.0;

    const int t = step_ + 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);

    for (auto& p : m.store.items()) {
      if (frozen_groups.count(param_group_name(p.group))) continue;
      auto it = grads.find(p.name);
      if (it == grads.end()) continue;
      const double lr = lr_at(param_group_name(p.group), step_);
      if (lr == 0.0) continue;
      Tensor& mom1 = moment(moments1_, p);
      Tensor& mom2 = moment(moments2_, p);
      for (std::size_t i = 0; i < p.value.data.size(); ++i) {
        double g = it->second.data[i] * scale;
        mom1.data[i] = cfg_.beta1 * mom1.data[i] + (1.0 - cfg_.beta1) * g;
        mom2.data[i] = cfg_.beta2 * mom2.data[i] + (1.0 - cfg_.beta2) * g * g;
        double mhat = mom1.data[i] / bc1;
        double vhat = mom2.data[i] / bc2;
        double upd = mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p.value.data[i];
        p.value.data[i] = to_f32(p.value.data[i] - lr * upd);
        mom1.data[i] = to_f32(mom1.data[i]);
        mom2.data[i] = to_f32(mom2.data[i]);
      }
    }
    ++step_;
    return norm;
  }

  const std::unordered_map<std::string, Tensor>& moments1() const { return moments1_; }
  const std::unordered_map<std::string, Tensor>& moments2() const { return moments2_; }
  void restore_moments(std::unordered_map<std::string, Tensor> m1,
                       std::unordered_map<std::string, Tensor> m2) {
    moments1_ = std::move(m1);
    moments2_ = std::move(m2);
  }

 private:
  Tensor& moment(std::unordered_map<std::string, Tensor>& store, const Parameter& p) {
    auto it = store.find(p.name);
    if (it == store.end())
      it = store.emplace(p.name, Tensor::zeros(p.value.rows, p.value.cols)).first;
    return it->second;
  }

  OptimizerConfig cfg_;
  int step_ = 0;
  int skipped_ = 0;
  std::unordered_map<std::string, Tensor> moments1_, moments2_;
};

}  // namespace flowact
