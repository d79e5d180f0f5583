#pragma once

#include <functional>
#include <string>

#include "flowact/policy/losses.hpp"
#include "flowact/policy/sampling.hpp"
#include "flowact/train/checkpoint.hpp"
#include "flowact/train/data.hpp"
#include "flowact/train/optimizer.hpp"

namespace flowact {

using MetricSink = std::function<void(const nlohmann::json&)>;

struct StepMetrics {
  int step = 0;
  double loss_act = 0.0;
  double loss_vl = 0.0;
  double grad_norm = 0.0;
};

// One optimization step over a mixed batch. Loss is exactly
// lambda_act * mean(L_act) + lambda_vl * mean(L_vl) over the batch's action
// and caption samples.
inline StepMetrics train_step(PolicyModel& model, Optimizer& opt, BatchMixer& mixer,
                              const TrainData& data, const StageConfig& cfg,
                              const Vocabulary& vocab, int step) {
  const bool track_enc = !cfg.frozen.count("encoder");
  const bool track_dec = !cfg.frozen.count("decoder");
  const bool track_head = !cfg.frozen.count("text-head");

  auto picks = mixer.next_batch(cfg.batch_size);
  const int vl_source = data.action_source_count();
  int n_act = 0, n_vl = 0;
  for (const auto& p : picks) (p.source == vl_source ? n_vl : n_act)++;

  GradMap grads;
  StepMetrics metrics;
  metrics.step = step;

  for (std::size_t j = 0; j < picks.size(); ++j) {
    const auto& pick = picks[j];
    std::uint64_t sample_seed = derive_seed(cfg.seed, "sample", step, j);
    if (pick.source == vl_source) {
      auto s = data.make_vl_sample(pick.item, sample_seed);
      Tape t;
      Var loss = vl_next_token_loss(t, model, s.caption_ids, s.obs, vocab, track_enc || track_head);
      metrics.loss_vl += t.val(loss).at(0, 0) / std::max(1, n_vl);
      if (cfg.lambda_vl > 0.0 && (track_enc || track_head)) {
        Var scaled = t.scale(loss, cfg.lambda_vl / n_vl);
        t.backward(scaled);
        collect_grads(t, model, grads);
      }
    } else {
      auto s = data.make_action_sample(pick.source, pick.item, sample_seed);
      Rng rng(derive_seed(cfg.seed, "tau-noise", step, j));
      double tau = sample_timestep(cfg.timestep, rng);
      Tensor y1 = Tensor::randn(model.cfg.horizon, model.cfg.channel_cap, rng);
      Tensor ytau = interpolate(s.y0, y1, tau);

      Tape t;
      Var cf = encode_condition(t, model, s.cond, vocab, track_enc);
      Var v = velocity_forward(t, model, t.constant(ytau), tau, cf, s.cond.embodiment_id,
                               track_dec, s.cond.state_vec);
      Var loss = flow_loss(t, v, s.y0, y1, s.mask);
      metrics.loss_act += t.val(loss).at(0, 0) / std::max(1, n_act);
      if (cfg.lambda_act > 0.0 && (track_enc || track_dec)) {
        Var scaled = t.scale(loss, cfg.lambda_act / n_act);
        t.backward(scaled);
        collect_grads(t, model, grads);
      }
    }
  }

  metrics.grad_norm = opt.step(model, grads, cfg.frozen);
  return metrics;
}

inline Optimizer make_optimizer(const StageConfig& cfg) {
  OptimizerConfig oc;
  oc.grad_clip = cfg.grad_clip;
  oc.weight_decay = cfg.weight_decay;
  oc.group_lr = cfg.lr;
  oc.lr_floor = cfg.lr_floor;
  oc.total_steps = cfg.steps;
  return Optimizer(oc);
}

// Shared stage loop; resumes from start_step when continuing a checkpoint.
inline void run_stage(PolicyModel& model, Optimizer& opt, const StageConfig& cfg,
                      const TrainData& data, const Vocabulary& vocab,
                      const MetricSink& sink = {}, int start_step = 0) {
  cfg.validate();
  auto sources = data.mix_sources(cfg.vl_weight);
  BatchMixer mixer(sources, cfg.seed);
  if (start_step > 0) mixer.skip_batches(start_step, cfg.batch_size);
  opt.set_step(start_step);

  for (int step = start_step; step < cfg.steps; ++step) {
    StepMetrics m = train_step(model, opt, mixer, data, cfg, vocab, step);
    if (sink) {
      nlohmann::json j;
      j["step"] = m.step;
      j["stage"] = stage_name(cfg.stage);
      j["loss_act"] = m.loss_act;
      j["loss_vl"] = m.loss_vl;
      j["grad_norm"] = m.grad_norm;
      j["lr_decoder"] = opt.lr_at("decoder", step);
      j["lr_encoder"] = opt.lr_at("encoder", step);
      j["skipped"] = opt.skipped();
      sink(j);
    }
  }
}

// Stage I: language-to-action pretraining. Vision-free by contract: the
// corpus must carry no observation tracks and the sample factory must not
// attach observation slots; only decoder parameters receive updates.
inline void run_t2a(PolicyModel& model, Optimizer& opt, StageConfig cfg, const TrainData& data,
                    const Vocabulary& vocab, const MetricSink& sink = {}, int start_step = 0) {
  if (cfg.stage != Stage::t2a) raise(ErrorKind::config_error, "run_t2a: wrong stage config");
  if (!cfg.t2a_vision_override) {
    if (data.has_view_tracks())
      raise(ErrorKind::config_error, "t2a corpus contains observation slots (vision-free stage)");
    // probe a sample: the factory must be configured without observations
    if (data.action_source_count() > 0 && data.action_source_size(0) > 0) {
      auto probe = data.make_action_sample(0, 0, 0);
      if (!probe.cond.obs.empty())
        raise(ErrorKind::config_error,
              "t2a data options attach observation slots (vision-free stage)");
    }
    cfg.frozen.insert("encoder");
    cfg.frozen.insert("text-head");
    cfg.vl_weight = 0.0;
    cfg.lambda_vl = 0.0;
  }
  run_stage(model, opt, cfg, data, vocab, sink, start_step);
}

// Stage II: joint multimodal training over the heterogeneous mixture.
inline void run_cpt(PolicyModel& model, Optimizer& opt, const StageConfig& cfg,
                    const TrainData& data, const Vocabulary& vocab, const MetricSink& sink = {},
                    int start_step = 0) {
  if (cfg.stage != Stage::cpt) raise(ErrorKind::config_error, "run_cpt: wrong stage config");
  for (int i = 0; i < data.action_source_count(); ++i)
    if (!data.has_view_tracks() && data.action_source_size(i) == 0)
      raise(ErrorKind::config_error, "cpt: empty action source " + data.action_source_name(i));
  run_stage(model, opt, cfg, data, vocab, sink, start_step);
}

// Stage III: supervised fine-tuning on the curated target distribution.
inline void run_sft(PolicyModel& model, Optimizer& opt, const StageConfig& cfg,
                    const TrainData& data, const Vocabulary& vocab, const MetricSink& sink = {},
                    int start_step = 0) {
  if (cfg.stage != Stage::sft) raise(ErrorKind::config_error, "run_sft: wrong stage config");
  run_stage(model, opt, cfg, data, vocab, sink, start_step);
}

// Mean masked flow loss over a fixed probe batch; used for held-out curves.
inline double probe_action_loss(const PolicyModel& model, const TrainData& data,
                                const Vocabulary& vocab, const TimestepDist& dist, int n,
                                std::uint64_t seed) {
  double total = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    int source = i % std::max(1, data.action_source_count());
    if (data.action_source_size(source) == 0) continue;
    Rng pick(derive_seed(seed, "probe-pick", i));
    int item = static_cast<int>(pick.uniform_index(data.action_source_size(source)));
    auto s = data.make_action_sample(source, item, derive_seed(seed, "probe", i));
    Rng rng(derive_seed(seed, "probe-tau", i));
    double tau = sample_timestep(dist, rng);
    Tensor y1 = Tensor::randn(model.cfg.horizon, model.cfg.channel_cap, rng);
    Tensor ytau = interpolate(s.y0, y1, tau);
    Tape t;
    Var cf = encode_condition(t, model, s.cond, vocab, false);
    Var v = velocity_forward(t, model, t.constant(ytau), tau, cf, s.cond.embodiment_id, false,
                             s.cond.state_vec);
    total += t.val(flow_loss(t, v, s.y0, y1, s.mask)).at(0, 0);
    ++count;
  }
  return count ? total / count : 0.0;
}

inline double probe_vl_loss(const PolicyModel& model, const TrainData& data,
                            const Vocabulary& vocab, int n, std::uint64_t seed) {
  double total = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (data.caption_pool_size() == 0) break;
    Rng pick(derive_seed(seed, "vlprobe-pick", i));
    int item = static_cast<int>(pick.uniform_index(data.caption_pool_size()));
    auto s = data.make_vl_sample(item, derive_seed(seed, "vlprobe", i));
    Tape t;
    total += t.val(vl_next_token_loss(t, model, s.caption_ids, s.obs, vocab, false)).at(0, 0);
    ++count;
  }
  return count ? total / count : 0.0;
}

}  // namespace flowact
