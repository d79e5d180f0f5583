#pragma once

#include <string>
#include <vector>

#include "flowact/policy/net.hpp"
#include "flowact/text/views.hpp"

namespace flowact {

// Everything the decoder is conditioned on. Prompt tokens carry the
// embodiment preamble and the instruction (plus discretized state tokens when
// that injection path is on); obs slots carry raw features; state_vec is the
// decoder-side continuous injection path. The two state paths are mutually
// exclusive.
struct Conditioning {
  std::string embodiment_id;
  std::vector<int> prompt_tokens;
  std::vector<ObsSlot> obs;
  std::vector<double> state_vec;
  int task_id = -1;

  void validate(const PolicyConfig& cfg) const {
    if (!cfg.state_in_decoder && !state_vec.empty())
      raise(ErrorKind::config_error, "conditioning: state_vec present but injection disabled");
    for (int id : prompt_tokens)
      if (id < 0 || id >= cfg.vocab_size)
        raise(ErrorKind::data_error, "conditioning: token id out of vocabulary");
  }
};

// Featurize one observation slot into rows of width h.
inline Var featurize_slot(Tape& t, const PolicyModel& m, const ObsSlot& slot, bool track) {
  const auto& cfg = m.cfg;
  if (slot.features.cols == cfg.obs_dim || slot.features.cols < cfg.obs_dim) {
    // structured state vector (zero-pad narrow inputs)
    Tensor padded(slot.features.rows, cfg.obs_dim);
    for (int i = 0; i < slot.features.rows; ++i)
      for (int j = 0; j < slot.features.cols; ++j) padded.at(i, j) = slot.features.at(i, j);
    Var x = t.constant(std::move(padded));
    Var h1 = t.tanh_(net::linear(t, x, m.p(t, "obs.w1", track), m.p(t, "obs.b1", track)));
    return net::linear(t, h1, m.p(t, "obs.w2", track), m.p(t, "obs.b2", track));
  }
  if (slot.features.cols == cfg.patch_dim()) {
    // pre-patched raster grid: rows are flattened patches
    Var x = t.constant(slot.features);
    return net::linear(t, x, m.p(t, "obs.grid_w", track), m.p(t, "obs.grid_b", track));
  }
  raise(ErrorKind::invalid_argument,
        "featurize_slot: unsupported feature width " + std::to_string(slot.features.cols));
}

// Splits a G x G x 3 raster (row-major, channel-last) into flattened patch
// rows suitable for the grid featurizer.
inline Tensor grid_to_patches(const std::vector<double>& grid, int size, int patch) {
  const int per_side = size / patch;
  Tensor out(per_side * per_side, patch * patch * 3);
  for (int py = 0; py < per_side; ++py)
    for (int px = 0; px < per_side; ++px) {
      int row = py * per_side + px;
      int col = 0;
      for (int dy = 0; dy < patch; ++dy)
        for (int dx = 0; dx < patch; ++dx)
          for (int c = 0; c < 3; ++c) {
            int y = py * patch + dy, x = px * patch + dx;
            out.at(row, col++) = grid[(static_cast<std::size_t>(y) * size + x) * 3 + c];
          }
    }
  return out;
}

// Contextualized condition features over [prompt tokens ++ tagged obs slots].
// Causal attention: the same stack scores captions left to right.
inline Var encode_condition(Tape& t, const PolicyModel& m, const Conditioning& cond,
                            const Vocabulary& vocab, bool track = true) {
  cond.validate(m.cfg);
  Var tok_table = m.p(t, "embed.tok", track);

  std::vector<Var> parts;
  if (!cond.prompt_tokens.empty()) parts.push_back(t.embed(tok_table, cond.prompt_tokens));
  for (const auto& item : tag_observation_stream(cond.obs, vocab)) {
    if (item.is_token()) {
      parts.push_back(t.embed(tok_table, {item.token_id}));
    } else {
      ObsSlot tmp{"", item.features};
      parts.push_back(featurize_slot(t, m, tmp, track));
    }
  }
  if (parts.empty()) raise(ErrorKind::invalid_argument, "encode_condition: empty conditioning");
  Var x = parts.size() == 1 ? parts[0] : t.concat_rows(parts);

  const int n = t.val(x).rows;
  if (n > m.cfg.max_seq)
    raise(ErrorKind::invalid_argument, "encode_condition: sequence exceeds max_seq");
  Var pos = t.slice_rows(m.p(t, "embed.pos", track), 0, n);
  x = t.add(x, pos);
  for (int i = 0; i < m.cfg.cond_blocks; ++i) {
    auto bp = net::block_params(t, m, "cond.b" + std::to_string(i), track);
    x = net::encoder_block(t, x, bp, m.cfg.heads, /*causal=*/true);
  }
  return t.layernorm(x, m.p(t, "cond.lnf.g", track), m.p(t, "cond.lnf.b", track));
}

}  // namespace flowact
