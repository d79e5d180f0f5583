#pragma once

#include <vector>

#include "flowact/datagen/planner.hpp"
#include "flowact/envs/env.hpp"

namespace flowact {

// Privileged reference policy: plans once at reset, then tracks the planned
// state sequence chunk by chunk. Delta-mode chunks spread the accumulated
// tracking error over the chunk's steps, so quantile clipping cannot build
// up drift across chunks. Absolute-joint chunks are setpoints and re-anchor
// by themselves.
class OraclePolicy {
 public:
  OraclePolicy(const Vocabulary& vocab) : vocab_(&vocab) {}

  void start_episode(const TaskInstance& inst) {
    plan_ = plan_trajectory(inst, *vocab_);
    spec_ = &embodiment(inst.embodiment_id);
    layout_ = state_layout(*spec_);
    cursor_ = 0;
  }

  bool exhausted() const { return cursor_ >= plan_.num_actions(); }

  // Builds the next normalized chunk given the actual world state row.
  ActionChunk next_chunk(const std::vector<float>& state_row, const NormalizerStats& stats) {
    const int d = spec_->native_dim;
    const int h_task = std::min(spec_->default_horizon,
                                std::max(1, plan_.num_actions() - cursor_));
    std::vector<std::vector<double>> rows(h_task, std::vector<double>(d, 0.0));

    const bool deltas = spec_->control_mode != ControlMode::abs_joint;
    std::vector<double> drift(layout_.pose_dim, 0.0);
    if (deltas && cursor_ < plan_.num_states()) {
      for (int k = 0; k < layout_.pose_dim; ++k)
        drift[k] = static_cast<double>(plan_.state_row(cursor_)[k]) - state_row[k];
      if (spec_->control_mode == ControlMode::waypoint)
        drift[2] = wrap_angle(drift[2]);
    }

    for (int h = 0; h < h_task; ++h) {
      const float* a = plan_.action_row(cursor_ + h);
      for (int k = 0; k < d; ++k) rows[h][k] = a[k];
      if (deltas)
        for (int k = 0; k < layout_.pose_dim; ++k) rows[h][k] += drift[k] / h_task;
    }
    cursor_ += h_task;
    return normalize_chunk(rows, stats, spec_->robot_tag, kHorizon, kChannelCap);
  }

  const Episode& plan() const { return plan_; }

 private:
  const Vocabulary* vocab_;
  Episode plan_;
  const EmbodimentSpec* spec_ = nullptr;
  StateLayout layout_;
  int cursor_ = 0;
};

// Runs the oracle against an environment episode; returns the reward.
inline double run_oracle_episode(ToyEnv& env, OraclePolicy& oracle, const NormalizerStats& stats,
                                 std::uint64_t seed) {
  env.reset(seed);
  oracle.start_episode(env.task());
  double total = 0.0;
  while (!oracle.exhausted()) {
    auto chunk = oracle.next_chunk(env.state().state_row, stats);
    auto r = env.step(chunk);
    total += r.reward;
    if (r.done) break;
  }
  return total;
}

}  // namespace flowact
