#pragma once

#include <string>
#include <vector>

#include "flowact/policy/conditioning.hpp"
#include "flowact/policy/net.hpp"

namespace flowact {

namespace detail {

inline int proj_index(const PolicyConfig& cfg, const std::string& embodiment_id) {
  for (std::size_t i = 0; i < cfg.proj_dims.size(); ++i)
    if (cfg.proj_dims[i].first == embodiment_id) return static_cast<int>(i);
  raise(ErrorKind::invalid_argument, "velocity_forward: unknown embodiment " + embodiment_id);
}

// Encode the native rows (leading d_i channels of the H x K grid) into h-dim
// action tokens under the configured projection design.
inline Var project_encode_rows(Tape& t, const PolicyModel& m, Var y_native,
                               const std::string& embodiment_id, bool track) {
  const auto& cfg = m.cfg;
  const int idx = proj_index(cfg, embodiment_id);
  const int d = cfg.proj_dims[idx].second;
  switch (cfg.projection) {
    case ProjectionKind::multi_mlp: {
      std::string suffix = ".e" + std::to_string(idx);
      return net::linear(t, y_native, m.p(t, "proj.enc.w" + suffix, track),
                         m.p(t, "proj.enc.b" + suffix, track));
    }
    case ProjectionKind::concat: {
      ProjectionConfig pc = cfg.projection_config();
      const int off = pc.segment_offset(embodiment_id);
      Var w_seg = t.slice_rows(m.p(t, "proj.enc.w", track), off, off + d);
      return t.add_row(t.matmul(y_native, w_seg), m.p(t, "proj.enc.b", track));
    }
    case ProjectionKind::zero_pad: {
      // right-padding with zeros == using the leading d rows of the shared map
      Var w_rows = t.slice_rows(m.p(t, "proj.enc.w", track), 0, d);
      return t.add_row(t.matmul(y_native, w_rows), m.p(t, "proj.enc.b", track));
    }
  }
  raise(ErrorKind::invalid_argument, "bad projection kind");
}

inline Var project_decode_rows(Tape& t, const PolicyModel& m, Var x,
                               const std::string& embodiment_id, bool track) {
  const auto& cfg = m.cfg;
  const int idx = proj_index(cfg, embodiment_id);
  const int d = cfg.proj_dims[idx].second;
  switch (cfg.projection) {
    case ProjectionKind::multi_mlp: {
      std::string suffix = ".e" + std::to_string(idx);
      return net::linear(t, x, m.p(t, "proj.dec.w" + suffix, track),
                         m.p(t, "proj.dec.b" + suffix, track));
    }
    case ProjectionKind::concat: {
      ProjectionConfig pc = cfg.projection_config();
      const int off = pc.segment_offset(embodiment_id);
      Var full = net::linear(t, x, m.p(t, "proj.dec.w", track), m.p(t, "proj.dec.b", track));
      return t.slice_cols(full, off, off + d);
    }
    case ProjectionKind::zero_pad: {
      Var full = net::linear(t, x, m.p(t, "proj.dec.w", track), m.p(t, "proj.dec.b", track));
      return t.slice_cols(full, 0, d);
    }
  }
  raise(ErrorKind::invalid_argument, "bad projection kind");
}

}  // namespace detail

// Timestep feature: sinusoidal embedding through a small MLP.
inline Var timestep_feature(Tape& t, const PolicyModel& m, double tau, bool track) {
  Var e = t.constant(net::sinusoidal_embedding(tau, m.cfg.time_embed_dim));
  Var h1 = t.tanh_(net::linear(t, e, m.p(t, "time.w1", track), m.p(t, "time.b1", track)));
  return net::linear(t, h1, m.p(t, "time.w2", track), m.p(t, "time.b2", track));
}

// DiT-lite velocity field. Action tokens attend jointly over the condition
// features and themselves; AdaLN modulation carries the timestep. The output
// is always H x K; channels beyond the embodiment's native dim read zero.
inline Var velocity_forward(Tape& t, const PolicyModel& m, Var y_tau, double tau, Var cond_feats,
                            const std::string& embodiment_id, bool track = true,
                            const std::vector<double>& state_vec = {}) {
  const auto& cfg = m.cfg;
  if (tau < 0.0 || tau > 1.0)
    raise(ErrorKind::invalid_argument, "velocity_forward: tau outside [0,1]");
  if (!t.val(y_tau).finite()) raise(ErrorKind::numeric_error, "velocity_forward: non-finite input");
  const int H = cfg.horizon;
  const int idx = detail::proj_index(cfg, embodiment_id);
  const int d = cfg.proj_dims[idx].second;

  Var y_native = t.slice_cols(y_tau, 0, d);
  Var act = detail::project_encode_rows(t, m, y_native, embodiment_id, track);
  act = t.add(act, t.slice_rows(m.p(t, "act.pos", track), 0, H));

  Var tf = timestep_feature(t, m, tau, track);

  std::vector<Var> seq_parts;
  if (cfg.state_in_decoder && !state_vec.empty()) {
    Tensor sv(1, cfg.state_inject_dim);
    for (int i = 0; i < cfg.state_inject_dim && i < static_cast<int>(state_vec.size()); ++i)
      sv.at(0, i) = state_vec[i];
    Var srow = net::linear(t, t.constant(std::move(sv)), m.p(t, "state.inject.w", track),
                           m.p(t, "state.inject.b", track));
    seq_parts.push_back(srow);
  }
  seq_parts.push_back(cond_feats);
  seq_parts.push_back(act);
  Var x = t.concat_rows(seq_parts);
  const int S = t.val(x).rows - H;

  for (int i = 0; i < cfg.dit_blocks; ++i) {
    std::string prefix = "dit.b" + std::to_string(i);
    Var mod6 = net::linear(t, tf, m.p(t, prefix + ".ada.w", track), m.p(t, prefix + ".ada.b", track));
    auto bp = net::block_params(t, m, prefix, track);
    x = net::dit_block(t, x, bp, mod6, cfg.heads);
  }

  Var out = t.slice_rows(x, S, S + H);
  out = t.layernorm(out, m.p(t, "dit.lnf.g", track), m.p(t, "dit.lnf.b", track));
  Var mod2 = net::linear(t, tf, m.p(t, "dit.final.ada.w", track), m.p(t, "dit.final.ada.b", track));
  const int h = cfg.hidden;
  out = net::modulate(t, out, t.slice_cols(mod2, 0, h), t.slice_cols(mod2, h, 2 * h));
  Var native = detail::project_decode_rows(t, m, out, embodiment_id, track);

  if (d == cfg.channel_cap) return native;
  Var zeros = t.constant(Tensor::zeros(H, cfg.channel_cap - d));
  return t.concat_cols({native, zeros});
}

}  // namespace flowact
