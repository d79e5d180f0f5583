#pragma once

#include "flowact/eval/evaluate.hpp"
#include "flowact/rl/ppo.hpp"
#include "flowact/train/stages.hpp"

namespace flowact {

struct RlRunResult {
  ValueHead value_head;
  int iterations = 0;
  double final_rollout_success = 0.0;
};

// PPO fine-tuning loop over a local env pool: collect with traces, update
// with the clipped surrogate, log one metrics record per iteration.
inline RlRunResult run_rl(PolicyModel& model, const EnvSpec& rollout_spec,
                          const NormalizerStats& stats, const PPOConfig& cfg, int iterations,
                          const Vocabulary& vocab, std::uint64_t seed,
                          const MetricSink& sink = {}) {
  cfg.validate();
  RlRunResult out;
  out.value_head = ValueHead::init(model.cfg.hidden);

  OptimizerConfig oc;
  oc.group_lr = {{"encoder", cfg.actor_lr}, {"decoder", cfg.actor_lr}};
  oc.total_steps = 0;  // flat schedule within the RL stage
  oc.weight_decay = 0.0;
  oc.grad_clip = 1.0;
  Optimizer actor_opt(oc);
  ValueOptimizer value_opt(model.cfg.hidden, cfg.value_lr);

  std::vector<ToyEnv> envs;
  for (int i = 0; i < cfg.n_envs; ++i) envs.emplace_back(rollout_spec, stats, vocab);

  for (int it = 0; it < iterations; ++it) {
    auto batch = collect_rollouts(model, out.value_head, envs, cfg, vocab,
                                  derive_seed(seed, "rl-iter", it));
    auto metrics = ppo_update(model, out.value_head, actor_opt, value_opt, batch, cfg, vocab,
                              derive_seed(seed, "rl-update", it));
    out.final_rollout_success = batch.success_rate;
    ++out.iterations;
    if (sink) {
      nlohmann::json j;
      j["iteration"] = it;
      j["success_rate"] = batch.success_rate;
      j["mean_return"] = batch.mean_return;
      j["mean_episode_len"] = batch.mean_episode_len;
      j["actor_loss"] = metrics.actor_loss;
      j["value_loss"] = metrics.value_loss;
      j["mean_ratio"] = metrics.mean_ratio;
      j["clip_fraction"] = metrics.clip_fraction;
      j["skipped_minibatches"] = metrics.skipped_minibatches;
      j["rollout_temperature"] = cfg.rollout_temperature;
      j["eval_temperature"] = cfg.eval_temperature;
      sink(j);
    }
  }
  return out;
}

}  // namespace flowact
