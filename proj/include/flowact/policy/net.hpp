#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flowact/autodiff.hpp"
#include "flowact/policy/params.hpp"

namespace flowact {

namespace net {

inline Var linear(Tape& t, Var x, Var w, Var b) { return t.add_row(t.matmul(x, w), b); }

// x * (1 + scale) + shift with 1 x h modulation rows
inline Var modulate(Tape& t, Var x, Var scale, Var shift) {
  return t.add_row(t.add(x, t.mul_row(x, scale)), shift);
}

inline const Tensor& causal_mask(int n) {
  thread_local std::vector<Tensor> cache;
  if (static_cast<int>(cache.size()) < n + 1) cache.resize(n + 1);
  Tensor& m = cache[n];
  if (m.rows != n) {
    m = Tensor(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m.at(i, j) = j > i ? -1e30 : 0.0;
  }
  return m;
}

struct BlockParams {
  Var ln1_g, ln1_b, wq, wk, wv, wo, bq, bk, bv, bo, ln2_g, ln2_b, mw1, mb1, mw2, mb2;
};

inline BlockParams block_params(Tape& t, const PolicyModel& m, const std::string& prefix,
                                bool track) {
  BlockParams b;
  b.ln1_g = m.p(t, prefix + ".ln1.g", track);
  b.ln1_b = m.p(t, prefix + ".ln1.b", track);
  b.wq = m.p(t, prefix + ".attn.wq", track);
  b.wk = m.p(t, prefix + ".attn.wk", track);
  b.wv = m.p(t, prefix + ".attn.wv", track);
  b.wo = m.p(t, prefix + ".attn.wo", track);
  b.bq = m.p(t, prefix + ".attn.bq", track);
  b.bk = m.p(t, prefix + ".attn.bk", track);
  b.bv = m.p(t, prefix + ".attn.bv", track);
  b.bo = m.p(t, prefix + ".attn.bo", track);
  b.ln2_g = m.p(t, prefix + ".ln2.g", track);
  b.ln2_b = m.p(t, prefix + ".ln2.b", track);
  b.mw1 = m.p(t, prefix + ".mlp.w1", track);
  b.mb1 = m.p(t, prefix + ".mlp.b1", track);
  b.mw2 = m.p(t, prefix + ".mlp.w2", track);
  b.mb2 = m.p(t, prefix + ".mlp.b2", track);
  return b;
}

inline Var attention(Tape& t, Var x, const BlockParams& p, int heads, bool causal) {
  const int n = t.val(x).rows;
  const int h = t.val(x).cols;
  const int dh = h / heads;
  Var q = linear(t, x, p.wq, p.bq);
  Var k = linear(t, x, p.wk, p.bk);
  Var v = linear(t, x, p.wv, p.bv);
  const Tensor* mask = causal ? &causal_mask(n) : nullptr;
  std::vector<Var> outs;
  for (int head = 0; head < heads; ++head) {
    Var qh = t.slice_cols(q, head * dh, (head + 1) * dh);
    Var kh = t.slice_cols(k, head * dh, (head + 1) * dh);
    Var vh = t.slice_cols(v, head * dh, (head + 1) * dh);
    Var scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
    Var probs = t.softmax_rows(scores, mask);
    outs.push_back(t.matmul(probs, vh));
  }
  Var cat = t.concat_cols(outs);
  return linear(t, cat, p.wo, p.bo);
}

inline Var mlp(Tape& t, Var x, const BlockParams& p) {
  return linear(t, t.tanh_(linear(t, x, p.mw1, p.mb1)), p.mw2, p.mb2);
}

// Pre-norm transformer block.
inline Var encoder_block(Tape& t, Var x, const BlockParams& p, int heads, bool causal) {
  Var a = attention(t, t.layernorm(x, p.ln1_g, p.ln1_b), p, heads, causal);
  x = t.add(x, a);
  Var f = mlp(t, t.layernorm(x, p.ln2_g, p.ln2_b), p);
  return t.add(x, f);
}

// DiT block: AdaLN modulation and gates driven by the timestep feature.
inline Var dit_block(Tape& t, Var x, const BlockParams& p, Var mod6, int heads) {
  const int h = t.val(x).cols;
  Var s1 = t.slice_cols(mod6, 0, h);
  Var sh1 = t.slice_cols(mod6, h, 2 * h);
  Var g1 = t.slice_cols(mod6, 2 * h, 3 * h);
  Var s2 = t.slice_cols(mod6, 3 * h, 4 * h);
  Var sh2 = t.slice_cols(mod6, 4 * h, 5 * h);
  Var g2 = t.slice_cols(mod6, 5 * h, 6 * h);
  Var a = attention(t, modulate(t, t.layernorm(x, p.ln1_g, p.ln1_b), s1, sh1), p, heads, false);
  x = t.add(x, t.mul_row(a, g1));
  Var f = mlp(t, modulate(t, t.layernorm(x, p.ln2_g, p.ln2_b), s2, sh2), p);
  return t.add(x, t.mul_row(f, g2));
}

inline Tensor sinusoidal_embedding(double tau, int dim) {
  Tensor e(1, dim);
  const int half = dim / 2;
  const double scaled = 1000.0 * tau;
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * i / half);
    e.at(0, i) = std::sin(scaled * freq);
    e.at(0, half + i) = std::cos(scaled * freq);
  }
  return e;
}

}  // namespace net

}  // namespace flowact
