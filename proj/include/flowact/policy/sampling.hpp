#pragma once

#include <vector>

#include "flowact/core/chunk.hpp"
#include "flowact/policy/velocity.hpp"

namespace flowact {

struct SamplerConfig {
  int n_steps = 10;
  double eta = 0.1;          // SDE noise scale, per-step sigma = T * eta * sqrt(dt)
  double sigma_floor = 1e-6; // recorded for the deterministic final step
};

// Recorded denoising path for one chunk: enough to recompute the selected
// Gaussian transition under fresh parameters.
struct DenoiseTrace {
  int n_steps = 0;
  double temperature = 0.0;
  std::vector<double> tau;      // n_steps + 1 grid values, 1 -> 0
  std::vector<Tensor> states;   // states[i] = Y at tau[i]
  std::vector<Tensor> mu;       // per-transition means
  std::vector<double> sigma;    // per-transition stds (floor on the last)
  int selected = -1;            // j*, uniform over stochastic transitions
  double stored_logprob = 0.0;  // masked logprob at rollout parameters

  bool scoreable() const { return temperature > 0.0 && selected >= 0; }
};

// Plain-tensor velocity evaluation: condition features are computed once and
// reused across denoising steps.
inline Tensor cond_features_value(const PolicyModel& m, const Conditioning& cond,
                                  const Vocabulary& vocab) {
  Tape t;
  Var f = encode_condition(t, m, cond, vocab, /*track=*/false);
  return t.val(f);
}

inline Tensor velocity_value(const PolicyModel& m, const Tensor& y_tau, double tau,
                             const Tensor& cond_feats, const Conditioning& cond) {
  Tape t;
  Var v = velocity_forward(t, m, t.constant(y_tau), tau, t.constant(cond_feats),
                           cond.embodiment_id, /*track=*/false, cond.state_vec);
  Tensor out = t.val(v);
  if (!out.finite()) raise(ErrorKind::numeric_error, "velocity_forward produced non-finite values");
  return out;
}

// Euler integration of a velocity field from tau=1 to tau=0 on a uniform
// grid: Y_{j-1} = Y_j - dt * v(Y_j, tau_j).
template <class Field>
inline Tensor euler_integrate(Tensor y, int n_steps, Field&& field) {
  if (n_steps < 1) raise(ErrorKind::invalid_argument, "euler_integrate: n_steps < 1");
  const double dt = 1.0 / n_steps;
  for (int i = 0; i < n_steps; ++i) {
    double tau = 1.0 - static_cast<double>(i) / n_steps;
    Tensor v = field(y, tau);
    for (std::size_t j = 0; j < y.data.size(); ++j) y.data[j] -= dt * v.data[j];
  }
  return y;
}

// Deterministic sampling of the learned field. Initial state is standard
// normal from the seed.
inline Tensor euler_sample(const PolicyModel& m, const Conditioning& cond, const Vocabulary& vocab,
                           int n_steps, std::uint64_t seed) {
  Tensor cf = cond_features_value(m, cond, vocab);
  Rng init_rng(derive_seed(seed, "chunk-init"));
  Tensor y0 = Tensor::randn(m.cfg.horizon, m.cfg.channel_cap, init_rng);
  Tensor y = euler_integrate(std::move(y0), n_steps, [&](const Tensor& yt, double tau) {
    return velocity_value(m, yt, tau, cf, cond);
  });
  if (!y.finite()) raise(ErrorKind::numeric_error, "euler_sample: non-finite output");
  return y;
}

// Noise-injected variant: every transition except the last becomes an
// explicit Gaussian, and the full path is recorded. Temperature scales the
// per-step noise; temperature 0 collapses to the deterministic path bitwise.
inline std::pair<Tensor, DenoiseTrace> sde_sample_with_trace(
    const PolicyModel& m, const Conditioning& cond, const Vocabulary& vocab,
    const SamplerConfig& sc, double temperature, std::uint64_t seed,
    const ChunkMask* mask_for_logprob = nullptr) {
  if (sc.n_steps < 1) raise(ErrorKind::invalid_argument, "sde_sample: n_steps < 1");
  if (temperature < 0) raise(ErrorKind::invalid_argument, "sde_sample: negative temperature");
  Tensor cf = cond_features_value(m, cond, vocab);

  DenoiseTrace trace;
  trace.n_steps = sc.n_steps;
  trace.temperature = temperature;
  const double dt = 1.0 / sc.n_steps;
  for (int i = 0; i <= sc.n_steps; ++i)
    trace.tau.push_back(1.0 - static_cast<double>(i) / sc.n_steps);

  Rng init_rng(derive_seed(seed, "chunk-init"));
  Tensor y = Tensor::randn(m.cfg.horizon, m.cfg.channel_cap, init_rng);
  Rng noise_rng(derive_seed(seed, "sde-noise"));

  for (int i = 0; i < sc.n_steps; ++i) {
    trace.states.push_back(y);
    double tau = trace.tau[i];
    Tensor v = velocity_value(m, y, tau, cf, cond);
    Tensor mu = y;
    for (std::size_t j = 0; j < y.data.size(); ++j) mu.data[j] -= dt * v.data[j];
    const bool last = i == sc.n_steps - 1;
    double sigma = last ? sc.sigma_floor : temperature * sc.eta * std::sqrt(dt);
    if (!last && sigma > 0.0) {
      y = mu;
      for (double& val : y.data) val += sigma * noise_rng.normal();
    } else {
      y = mu;  // deterministic final step (and the whole path at temperature 0)
    }
    trace.mu.push_back(std::move(mu));
    trace.sigma.push_back(sigma);
  }
  trace.states.push_back(y);

  if (temperature > 0.0 && sc.n_steps >= 2) {
    Rng pick_rng(derive_seed(seed, "sde-select"));
    trace.selected = static_cast<int>(pick_rng.uniform_index(sc.n_steps - 1));
  }
  if (!y.finite()) raise(ErrorKind::numeric_error, "sde_sample: non-finite output");

  if (mask_for_logprob && trace.scoreable()) {
    Tape t;
    Var cfv = t.constant(cf);
    int j = trace.selected;
    Var mu_v = t.constant(trace.mu[j]);
    Var lp = t.gaussian_logprob_masked(mu_v, trace.states[j + 1], trace.sigma[j],
                                       mask_for_logprob->as_tensor());
    trace.stored_logprob = t.val(lp).at(0, 0);
    (void)cfv;
  }
  return {std::move(y), std::move(trace)};
}

// Recomputes the selected transition's mean under the current parameters and
// scores the stored next state, restricted to valid cells. This is the
// quantity PPO's importance ratio compares across parameter versions.
inline Var chunk_logprob(Tape& t, const PolicyModel& m, const DenoiseTrace& trace,
                         const Conditioning& cond, const Vocabulary& vocab, const ChunkMask& mask,
                         bool track = true) {
  if (!trace.scoreable())
    raise(ErrorKind::invalid_argument,
          "chunk_logprob: trace not scoreable (temperature 0 or single step)");
  const int j = trace.selected;
  if (trace.sigma[j] <= 0.0)
    raise(ErrorKind::invalid_argument, "chunk_logprob: zero sigma at the selected step");
  const double dt = 1.0 / trace.n_steps;
  Var cf = encode_condition(t, m, cond, vocab, track);
  Var v = velocity_forward(t, m, t.constant(trace.states[j]), trace.tau[j], cf,
                           cond.embodiment_id, track, cond.state_vec);
  Var mu = t.sub(t.constant(trace.states[j]), t.scale(v, dt));
  return t.gaussian_logprob_masked(mu, trace.states[j + 1], trace.sigma[j], mask.as_tensor());
}

inline double chunk_logprob_value(const PolicyModel& m, const DenoiseTrace& trace,
                                  const Conditioning& cond, const Vocabulary& vocab,
                                  const ChunkMask& mask) {
  Tape t;
  return t.val(chunk_logprob(t, m, trace, cond, vocab, mask, /*track=*/false)).at(0, 0);
}

}  // namespace flowact
