#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "flowact/envs/env.hpp"
#include "flowact/policy/sampling.hpp"
#include "flowact/rl/gae.hpp"
#include "flowact/rl/value.hpp"
#include "flowact/train/optimizer.hpp"

namespace flowact {

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double value_coef = 1.0;      // c_v
  int update_epochs = 4;
  double actor_lr = 5e-6;
  double value_lr = 1e-4;       // ~20x the actor rate
  int n_envs = 16;              // paper-scale 128 stays available via config
  int rollout_epochs = 8;
  int env_steps_per_epoch = 128;
  double rollout_temperature = 1.0;
  double eval_temperature = 0.6;
  int minibatch_size = 64;
  int sde_steps = 10;
  double value_clip = 0.2;

  int chunks_per_epoch() const { return env_steps_per_epoch / kHorizon; }
  long chunks_per_iteration() const {
    return static_cast<long>(n_envs) * chunks_per_epoch() * rollout_epochs;
  }

  void validate() const {
    if (clip_eps <= 0) raise(ErrorKind::config_error, "ppo: clip_eps must be positive");
    if (update_epochs < 1) raise(ErrorKind::config_error, "ppo: update_epochs must be >= 1");
    if (rollout_temperature <= 0)
      raise(ErrorKind::config_error,
            "ppo: rollout temperature 0 makes traces unscoreable");
    if (eval_temperature < 0) raise(ErrorKind::config_error, "ppo: negative eval temperature");
    if (env_steps_per_epoch < kHorizon)
      raise(ErrorKind::config_error, "ppo: env_steps_per_epoch below one chunk");
  }
};

struct RolloutBatch {
  std::vector<Transition> transitions;
  std::vector<DenoiseTrace> traces;
  std::vector<Conditioning> conds;
  std::vector<ChunkMask> masks;
  std::vector<double> advantages;
  std::vector<double> returns;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double mean_episode_len = 0.0;
};

// On-policy rollout collection across the env pool. Actions come from the
// stochastic sampler at the rollout temperature; every transition stores its
// value estimate, chunk logprob and denoising trace.
inline RolloutBatch collect_rollouts(const PolicyModel& model, const ValueHead& value_head,
                                     std::vector<ToyEnv>& envs, const PPOConfig& cfg,
                                     const Vocabulary& vocab, std::uint64_t seed) {
  cfg.validate();
  RolloutBatch batch;
  SamplerConfig sc;
  sc.n_steps = cfg.sde_steps;

  struct EnvTrack {
    bool needs_reset = true;
    int episodes = 0;
    std::vector<int> transition_ids;
  };
  std::vector<EnvTrack> tracks(envs.size());
  int episodes_done = 0, successes = 0;
  long episode_len_sum = 0;

  for (int epoch = 0; epoch < cfg.rollout_epochs; ++epoch) {
    for (std::size_t e = 0; e < envs.size(); ++e) {
      for (int c = 0; c < cfg.chunks_per_epoch(); ++c) {
        auto& track = tracks[e];
        if (track.needs_reset) {
          envs[e].reset(derive_seed(seed, "env-reset", e, track.episodes));
          track.needs_reset = false;
        }
        Conditioning cond = envs[e].conditioning();
        const EmbodimentSpec& es = embodiment(cond.embodiment_id);
        ChunkMask mask = build_mask(es.native_dim, es.default_horizon);

        Tensor feats = cond_features_value(model, cond, vocab);
        double value = value_head.forward(feats);

        std::uint64_t chunk_seed =
            derive_seed(seed, "chunk", e, batch.transitions.size() * 131 + epoch);
        auto [y, trace] = sde_sample_with_trace(model, cond, vocab, sc, cfg.rollout_temperature,
                                                chunk_seed, &mask);

        ActionChunk chunk;
        chunk.c = es.native_dim;
        chunk.H_task = es.default_horizon;
        chunk.embodiment_id = cond.embodiment_id;
        chunk.mask = mask;
        chunk.values = Tensor::zeros(kHorizon, kChannelCap);
        for (int h = 0; h < chunk.H_task; ++h)
          for (int k = 0; k < chunk.c; ++k) chunk.values.at(h, k) = y.at(h, k);

        auto r = envs[e].step(chunk);

        Transition tr;
        tr.reward = r.reward;
        tr.done = r.done;
        tr.value = value;
        tr.logprob = trace.stored_logprob;
        tr.trace_ref = static_cast<int>(batch.traces.size());
        batch.traces.push_back(std::move(trace));
        batch.conds.push_back(std::move(cond));
        batch.masks.push_back(mask);
        tr.chunk = std::move(chunk);
        track.transition_ids.push_back(static_cast<int>(batch.transitions.size()));
        batch.transitions.push_back(std::move(tr));

        if (r.done) {
          ++episodes_done;
          episode_len_sum += envs[e].elapsed();
          if (r.state.success) ++successes;
          track.needs_reset = true;
          ++track.episodes;
        }
      }
    }
  }

  // advantages and returns per env stream
  batch.advantages.assign(batch.transitions.size(), 0.0);
  batch.returns.assign(batch.transitions.size(), 0.0);
  for (const auto& track : tracks) {
    std::vector<double> rewards, values;
    std::vector<bool> dones;
    for (int id : track.transition_ids) {
      rewards.push_back(batch.transitions[id].reward);
      values.push_back(batch.transitions[id].value);
      dones.push_back(batch.transitions[id].done);
    }
    std::vector<double> adv, ret;
    compute_gae(rewards, values, dones, cfg.gamma, cfg.gae_lambda, adv, ret);
    for (std::size_t i = 0; i < track.transition_ids.size(); ++i) {
      batch.advantages[track.transition_ids[i]] = adv[i];
      batch.returns[track.transition_ids[i]] = ret[i];
    }
  }

  double ret_sum = 0.0;
  for (const auto& t : batch.transitions) ret_sum += t.reward;
  batch.success_rate = episodes_done ? static_cast<double>(successes) / episodes_done : 0.0;
  batch.mean_return = episodes_done ? ret_sum / episodes_done : 0.0;
  batch.mean_episode_len = episodes_done ? static_cast<double>(episode_len_sum) / episodes_done : 0.0;
  return batch;
}

struct PPOMetrics {
  double actor_loss = 0.0;
  double value_loss = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  int skipped_minibatches = 0;
  double first_minibatch_max_ratio_err = 0.0;  // |ratio - 1| before the first update
};

// Clipped-surrogate PPO update with a clipped value regression. Actor
// gradients flow through the chunk log-probability recomputation into the
// encoder and decoder groups; the value head updates through its own
// optimizer and can never touch them.
inline PPOMetrics ppo_update(PolicyModel& model, ValueHead& value_head, Optimizer& actor_opt,
                             ValueOptimizer& value_opt, const RolloutBatch& batch,
                             const PPOConfig& cfg, const Vocabulary& vocab, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = batch.transitions.size();
  if (n == 0) raise(ErrorKind::invalid_argument, "ppo_update: empty batch");

  // advantage normalization per update batch
  double mean = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  double stddev = std::sqrt(var / n);
  if (stddev < 1e-8) stddev = 1.0;
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) adv[i] = (batch.advantages[i] - mean) / stddev;

  PPOMetrics metrics;
  long ratio_count = 0, clip_count = 0;
  bool first_minibatch = true;

  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(seed, "ppo-shuffle", epoch));
    shuffle_rng.shuffle(order);

    for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
      std::size_t stop = std::min(n, start + cfg.minibatch_size);
      const int mb = static_cast<int>(stop - start);

      // pass 1: ratios in plain arithmetic; a non-finite ratio skips the
      // whole minibatch
      std::vector<double> lp_new(mb), ratio(mb);
      bool finite = true;
      for (int j = 0; j < mb; ++j) {
        int idx = order[start + j];
        lp_new[j] = chunk_logprob_value(model, batch.traces[batch.transitions[idx].trace_ref],
                                        batch.conds[idx], vocab, batch.masks[idx]);
        ratio[j] = std::exp(lp_new[j] - batch.transitions[idx].logprob);
        if (!std::isfinite(ratio[j])) finite = false;
      }
      if (!finite) {
        ++metrics.skipped_minibatches;
        continue;
      }

      GradMap actor_grads;
      double actor_loss_mb = 0.0;
      for (int j = 0; j < mb; ++j) {
        int idx = order[start + j];
        const double a = adv[idx];
        if (first_minibatch)
          metrics.first_minibatch_max_ratio_err =
              std::max(metrics.first_minibatch_max_ratio_err, std::abs(ratio[j] - 1.0));
        ++ratio_count;
        metrics.mean_ratio += ratio[j];
        if (ratio[j] < 1.0 - cfg.clip_eps || ratio[j] > 1.0 + cfg.clip_eps) ++clip_count;

        Tape t;
        Var lp = chunk_logprob(t, model, batch.traces[batch.transitions[idx].trace_ref],
                               batch.conds[idx], vocab, batch.masks[idx], true);
        Tensor lp_old(1, 1);
        lp_old.at(0, 0) = batch.transitions[idx].logprob;
        Var r = t.exp_(t.sub(lp, t.constant(lp_old)));
        Var surr1 = t.scale(r, a);
        Var surr2 = t.scale(t.clip(r, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), a);
        Var obj = t.minimum(surr1, surr2);
        Var loss = t.scale(obj, -1.0 / mb);
        actor_loss_mb += t.val(loss).at(0, 0);
        t.backward(loss);
        collect_grads(t, model, actor_grads);
      }
      metrics.actor_loss += actor_loss_mb;
      actor_opt.step(model, actor_grads, {"text-head"});

      // clipped value regression on recomputed features (constants for the
      // head; the stop-gradient boundary is structural)
      Tensor grad_w = Tensor::zeros(1, value_head.w.cols);
      double grad_b = 0.0;
      double value_loss_mb = 0.0;
      for (int j = 0; j < mb; ++j) {
        int idx = order[start + j];
        Tensor feats = cond_features_value(model, batch.conds[idx], vocab);
        Tensor pooled = ValueHead::pool(feats);
        double v = value_head.b;
        for (int k = 0; k < value_head.w.cols; ++k) v += value_head.w.at(0, k) * pooled.at(0, k);
        const double v_old = batch.transitions[idx].value;
        const double ret = batch.returns[idx];
        double dv = v - v_old;
        double v_clip = v_old + std::min(cfg.value_clip, std::max(-cfg.value_clip, dv));
        double e_raw = v - ret, e_clip = v_clip - ret;
        double dl;
        if (e_raw * e_raw >= e_clip * e_clip) {
          value_loss_mb += e_raw * e_raw / mb;
          dl = 2.0 * e_raw / mb;
        } else {
          value_loss_mb += e_clip * e_clip / mb;
          dl = (std::abs(dv) < cfg.value_clip) ? 2.0 * e_clip / mb : 0.0;
        }
        dl *= cfg.value_coef;
        for (int k = 0; k < value_head.w.cols; ++k) grad_w.at(0, k) += dl * pooled.at(0, k);
        grad_b += dl;
      }
      metrics.value_loss += value_loss_mb;
      value_opt.step(value_head, grad_w, grad_b);
      first_minibatch = false;
    }
  }
  if (ratio_count) metrics.mean_ratio /= ratio_count;
  if (ratio_count) metrics.clip_fraction = static_cast<double>(clip_count) / ratio_count;
  return metrics;
}

}  // namespace flowact
