#pragma once

#include <vector>

#include "flowact/core/chunk.hpp"
#include "flowact/policy/conditioning.hpp"

namespace flowact {

// Linear interpolant Y_tau = (1 - tau) Y0 + tau Y1.
inline Tensor interpolate(const Tensor& y0, const Tensor& y1, double tau) {
  if (!y0.same_shape(y1)) raise(ErrorKind::invalid_argument, "interpolate: shape mismatch");
  Tensor out = y0;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (1.0 - tau) * y0.data[i] + tau * y1.data[i];
  return out;
}

// Two-level masked flow-matching loss: per-channel mean over valid steps,
// then a uniform average over the c active channels. Masked-out cells carry
// exactly zero weight.
inline Tensor flow_loss_weights(const ChunkMask& mask) {
  if (mask.c == 0) raise(ErrorKind::invalid_argument, "flow_loss: c = 0");
  Tensor w(mask.H, mask.K);
  std::vector<double> col_counts(mask.K, 0.0);
  for (int h = 0; h < mask.H; ++h)
    for (int k = 0; k < mask.K; ++k)
      if (mask.at(h, k)) col_counts[k] += 1.0;
  for (int h = 0; h < mask.H; ++h)
    for (int k = 0; k < mask.K; ++k)
      if (mask.at(h, k)) w.at(h, k) = 1.0 / (col_counts[k] * mask.c);
  return w;
}

inline Var flow_loss(Tape& t, Var v_hat, const Tensor& y0, const Tensor& y1,
                     const ChunkMask& mask) {
  Tensor target = y1;
  for (std::size_t i = 0; i < target.data.size(); ++i) target.data[i] -= y0.data[i];
  Var diff = t.sub(v_hat, t.constant(std::move(target)));
  return t.weighted_sse(diff, flow_loss_weights(mask));
}

// Plain-Tensor evaluation (no gradients) for samplers and evaluation code.
inline double flow_loss_value(const Tensor& v_hat, const Tensor& y0, const Tensor& y1,
                              const ChunkMask& mask) {
  Tensor w = flow_loss_weights(mask);
  double s = 0.0;
  for (int h = 0; h < mask.H; ++h)
    for (int k = 0; k < mask.K; ++k) {
      double d = v_hat.at(h, k) - (y1.at(h, k) - y0.at(h, k));
      s += w.at(h, k) * d * d;
    }
  return s;
}

// Next-token prediction over [tagged observation slots ++ caption tokens].
// Mean NLL over the predicted positions.
inline Var vl_next_token_loss(Tape& t, const PolicyModel& m, const std::vector<int>& caption_ids,
                              const std::vector<ObsSlot>& obs, const Vocabulary& vocab,
                              bool track = true) {
  if (caption_ids.size() < 2)
    raise(ErrorKind::invalid_argument, "vl_next_token_loss: need at least two tokens");
  Var tok_table = m.p(t, "embed.tok", track);

  std::vector<Var> parts;
  int obs_len = 0;
  for (const auto& item : tag_observation_stream(obs, vocab)) {
    if (item.is_token()) {
      parts.push_back(t.embed(tok_table, {item.token_id}));
      obs_len += 1;
    } else {
      ObsSlot tmp{"", item.features};
      parts.push_back(featurize_slot(t, m, tmp, track));
      obs_len += item.features.rows;
    }
  }
  parts.push_back(t.embed(tok_table, caption_ids));
  Var x = parts.size() == 1 ? parts[0] : t.concat_rows(parts);

  const int n = t.val(x).rows;
  if (n > m.cfg.max_seq)
    raise(ErrorKind::invalid_argument, "vl_next_token_loss: sequence exceeds max_seq");
  x = t.add(x, t.slice_rows(m.p(t, "embed.pos", track), 0, n));
  for (int i = 0; i < m.cfg.cond_blocks; ++i) {
    auto bp = net::block_params(t, m, "cond.b" + std::to_string(i), track);
    x = net::encoder_block(t, x, bp, m.cfg.heads, /*causal=*/true);
  }
  x = t.layernorm(x, m.p(t, "cond.lnf.g", track), m.p(t, "cond.lnf.b", track));

  const int n_caption = static_cast<int>(caption_ids.size());
  Var pred_feats = t.slice_rows(x, obs_len, obs_len + n_caption - 1);
  Var logits = net::linear(t, pred_feats, m.p(t, "head.w", track), m.p(t, "head.b", track));
  std::vector<int> targets(caption_ids.begin() + 1, caption_ids.end());
  return t.cross_entropy_mean(logits, targets);
}

}  // namespace flowact
