#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "flowact/core/chunk.hpp"
#include "flowact/core/normalizer.hpp"
#include "flowact/core/prompt.hpp"
#include "flowact/datagen/tasks.hpp"
#include "flowact/policy/conditioning.hpp"

namespace flowact {

struct EnvSpec {
  std::string spec_id;
  TemplateFamily family = TemplateFamily::pick_place;
  std::string embodiment_id = "point-gripper";
  TaskSamplerOptions sampler;
  double feature_noise_std = 0.01;
  std::set<std::string> ood_tags;
  int max_steps = 2000;  // elapsed low-level control steps
  bool grid_obs = false;

  void validate() const {
    if (max_steps <= 0) raise(ErrorKind::invalid_argument, "env: max_steps must be positive");
    if (!embodiment_known(embodiment_id))
      raise(ErrorKind::invalid_argument, "env: unknown embodiment " + embodiment_id);
    if (!family_supported(family, embodiment(embodiment_id)))
      raise(ErrorKind::invalid_argument, "env: family unsupported on embodiment");
  }
};

// Snapshot of the world; numerics live on the f32 grid so wire transport
// with 9 significant decimal digits is lossless.
struct EnvState {
  std::vector<float> state_row;
  int elapsed = 0;
  bool done = false;
  bool success = false;
};

// Per-chunk transition record for RL.
struct Transition {
  Conditioning cond;
  ActionChunk chunk;
  double reward = 0.0;
  bool done = false;
  double value = 0.0;
  double logprob = 0.0;
  int trace_ref = -1;  // index into the rollout batch's trace pool
};

inline NormalizerStats identity_stats(int dim) {
  NormalizerStats s;
  s.dataset_id = "identity";
  s.dims.assign(dim, DimStats{-1.0, 1.0, false});
  return s;
}

// Closed-loop toy environment: one step executes a whole action chunk through
// the kinematic world at the embodiment's control rate.
class ToyEnv {
 public:
  ToyEnv(const EnvSpec& spec, NormalizerStats stats, const Vocabulary& vocab)
      : spec_(spec), stats_(std::move(stats)), vocab_(&vocab) {
    spec_.validate();
    if (stats_.dim() != embodiment(spec_.embodiment_id).native_dim)
      raise(ErrorKind::invalid_argument, "env: normalizer dim mismatch");
  }

  const EnvSpec& env_spec() const { return spec_; }
  const TaskInstance& task() const { return *task_; }
  const KinematicSim& world() const { return *sim_; }
  int elapsed() const { return elapsed_; }

  std::pair<EnvState, Conditioning> reset(std::uint64_t seed) {
    seed_ = seed;
    task_ = std::make_unique<TaskInstance>(
        sample_task_instance(spec_.family, spec_.embodiment_id, seed, *vocab_, spec_.sampler));
    sim_ = std::make_unique<KinematicSim>(embodiment(spec_.embodiment_id), *task_);
    elapsed_ = 0;
    chunks_ = 0;
    done_ = false;
    success_ = false;
    return {state(), conditioning()};
  }

  EnvState state() const {
    EnvState s;
    auto row = sim_->state_row();
    s.state_row.reserve(row.size());
    for (double v : row) s.state_row.push_back(static_cast<float>(v));
    s.elapsed = elapsed_;
    s.done = done_;
    s.success = success_;
    return s;
  }

  // Conditioning for the next chunk decision; observation noise is a pure
  // function of (seed, chunk counter).
  Conditioning conditioning() const {
    const EmbodimentSpec& es = embodiment(spec_.embodiment_id);
    Conditioning c;
    c.embodiment_id = spec_.embodiment_id;
    auto prompt = render_embodiment_prompt(es, task_->instruction.prompt_form(), es.default_horizon);
    c.prompt_tokens = tokenize(prompt, *vocab_);
    c.obs.push_back({"ego", obs_features()});
    return c;
  }

  struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool done = false;
  };

  // Executes the valid rows of a normalized chunk. Reward is 1 exactly once,
  // on the terminal transition of a successful episode.
  StepResult step(const ActionChunk& chunk) {
    if (!sim_) raise(ErrorKind::protocol_error, "step before reset");
    if (done_) raise(ErrorKind::protocol_error, "step on a finished episode");
    if (chunk.embodiment_id != spec_.embodiment_id)
      raise(ErrorKind::invalid_argument, "step: chunk embodiment mismatch");
    const EmbodimentSpec& es = embodiment(spec_.embodiment_id);
    if (chunk.c != es.native_dim)
      raise(ErrorKind::invalid_argument, "step: chunk channel count mismatch");

    for (int h = 0; h < chunk.H_task && !done_; ++h) {
      std::vector<double> normalized(es.native_dim);
      // actions land on the f32 grid: local execution matches wire transport
      for (int k = 0; k < es.native_dim; ++k) normalized[k] = to_f32(chunk.values.at(h, k));
      auto native = denormalize_actions(normalized, stats_);
      sim_->step(native.data());
      ++elapsed_;
      if (task_success(*task_, *sim_)) success_ = true;
      if (elapsed_ >= spec_.max_steps) done_ = true;
    }
    ++chunks_;
    if (success_) done_ = true;
    StepResult r;
    r.done = done_;
    r.reward = (done_ && success_) ? 1.0 : 0.0;
    r.state = state();
    return r;
  }

 private:
  Tensor obs_features() const {
    auto row = sim_->state_row();
    Rng noise(derive_seed(seed_, "obs-noise", chunks_));
    if (spec_.grid_obs) {
      auto grid = rasterize();
      for (auto& v : grid)
        v = to_f32(v + spec_.feature_noise_std * noise.normal());
      return grid_to_patches(grid, 16, 4);
    }
    Tensor feat(1, static_cast<int>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i)
      feat.at(0, i) = to_f32(row[i] + spec_.feature_noise_std * noise.normal());
    return feat;
  }

  // 16 x 16 x 3 occupancy raster: objects paint their color mix, the
  // effector paints white.
  std::vector<double> rasterize() const {
    std::vector<double> grid(16 * 16 * 3, 0.0);
    auto paint = [&](double x, double y, double r, double g, double b) {
      int gx = std::min(15, std::max(0, static_cast<int>(x * 16)));
      int gy = std::min(15, std::max(0, static_cast<int>(y * 16)));
      std::size_t at = (static_cast<std::size_t>(gy) * 16 + gx) * 3;
      grid[at] = r;
      grid[at + 1] = g;
      grid[at + 2] = b;
    };
    for (const auto& o : sim_->scene().objects) {
      double r = o.color == "red" ? 1 : 0, g = o.color == "green" ? 1 : 0,
             b = o.color == "blue" ? 1 : 0;
      if (o.color == "yellow") { r = 1; g = 1; }
      paint(o.x, o.y, r, g, b);
    }
    double ex, ey, eyaw;
    sim_->effector(ex, ey, eyaw);
    paint(ex, ey, 1, 1, 1);
    return grid;
  }

  EnvSpec spec_;
  NormalizerStats stats_;
  const Vocabulary* vocab_;
  std::unique_ptr<TaskInstance> task_;
  std::unique_ptr<KinematicSim> sim_;
  std::uint64_t seed_ = 0;
  int elapsed_ = 0;
  int chunks_ = 0;
  bool done_ = false;
  bool success_ = false;
};

// Builds a normalized chunk from native planner actions; the env will undo
// the normalization internally.
inline ActionChunk normalize_chunk(const std::vector<std::vector<double>>& native_rows,
                                   const NormalizerStats& stats, const std::string& embodiment_id,
                                   int H = kHorizon, int K = kChannelCap) {
  const int c = stats.dim();
  const int steps = std::min<int>(H, static_cast<int>(native_rows.size()));
  ActionChunk ch;
  ch.c = c;
  ch.H_task = steps;
  ch.embodiment_id = embodiment_id;
  ch.mask = build_mask(c, steps, H, K);
  ch.values = Tensor::zeros(H, K);
  for (int h = 0; h < steps; ++h) {
    auto norm = normalize_actions(native_rows[h], stats);
    for (int k = 0; k < c; ++k) ch.values.at(h, k) = norm[k];
  }
  return ch;
}

}  // namespace flowact
