#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowact/autodiff.hpp"
#include "flowact/common.hpp"
#include "flowact/core/embodiment.hpp"
#include "flowact/core/projection.hpp"
#include "flowact/rng.hpp"

namespace flowact {

enum class ParamGroup { encoder, decoder, text_head };

inline const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::decoder: return "decoder";
    case ParamGroup::text_head: return "text-head";
  }
  return "?";
}

struct Parameter {
  std::string name;
  ParamGroup group;
  Tensor value;
};

class ParamStore {
 public:
  int add(const std::string& name, ParamGroup group, Tensor value) {
    if (index_.count(name)) raise(ErrorKind::invalid_argument, "duplicate parameter " + name);
    index_[name] = static_cast<int>(items_.size());
    items_.push_back({name, group, std::move(value)});
    return static_cast<int>(items_.size()) - 1;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) raise(ErrorKind::invalid_argument, "unknown parameter " + name);
    return items_[it->second];
  }
  const Parameter& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) raise(ErrorKind::invalid_argument, "unknown parameter " + name);
    return items_[it->second];
  }

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p.value.size();
    return n;
  }

 private:
  std::vector<Parameter> items_;
  std::unordered_map<std::string, int> index_;
};

// Architecture of the condition encoder + DiT-lite velocity network.
struct PolicyConfig {
  int hidden = 128;     // shared width h
  int cond_blocks = 2;  // condition transformer depth
  int dit_blocks = 4;   // DiT-lite depth
  int heads = 4;
  int time_embed_dim = 64;
  int mlp_mult = 4;
  int vocab_size = 0;
  int horizon = kHorizon;
  int channel_cap = kChannelCap;
  int max_seq = 160;
  int obs_dim = 24;       // structured state featurizer input (zero padded)
  int grid_size = 16;     // optional raster view
  int grid_patch = 4;
  ProjectionKind projection = ProjectionKind::zero_pad;
  std::vector<std::pair<std::string, int>> proj_dims;  // (embodiment, d_i)
  bool state_tokens = false;      // prompt-side state injection (256 bins)
  bool state_in_decoder = false;  // decoder-side continuous state injection
  int state_inject_dim = 24;

  int head_dim() const { return hidden / heads; }
  int patch_dim() const { return grid_patch * grid_patch * 3; }
  int grid_tokens() const {
    int per_side = grid_size / grid_patch;
    return per_side * per_side;
  }

  ProjectionConfig projection_config() const {
    ProjectionConfig pc;
    pc.kind = projection;
    pc.hidden = hidden;
    pc.dims = proj_dims;
    return pc;
  }

  void validate() const {
    if (hidden % heads != 0)
      raise(ErrorKind::config_error, "policy: hidden must be divisible by heads");
    if (vocab_size <= 0) raise(ErrorKind::config_error, "policy: vocab_size unset");
    if (proj_dims.empty()) raise(ErrorKind::config_error, "policy: projection dims unset");
    if (state_tokens && state_in_decoder)
      raise(ErrorKind::config_error,
            "policy: prompt state tokens and decoder state injection are mutually exclusive");
    for (const auto& [id, d] : proj_dims)
      if (d < 1 || d > channel_cap)
        raise(ErrorKind::config_error, "policy: projection dim out of range for " + id);
  }
};

enum class InitMode { standard, randomized };

// The single trainable object. Group tags drive stage freeze maps.
struct PolicyModel {
  PolicyConfig cfg;
  ParamStore store;

  static PolicyModel init(const PolicyConfig& cfg, std::uint64_t seed,
                          InitMode mode = InitMode::standard) {
    cfg.validate();
    PolicyModel m;
    m.cfg = cfg;
    Rng rng(derive_seed(seed, "init-params"));
    const int h = cfg.hidden;
    const bool rnd = mode == InitMode::randomized;

    auto linear_w = [&](int in, int out) { return Tensor::randn(in, out, rng, 1.0 / std::sqrt(double(in))); };
    auto zeros_or_small = [&](int r, int c) {
      return rnd ? Tensor::randn(r, c, rng, 0.02) : Tensor::zeros(r, c);
    };
    auto add = [&](const std::string& name, ParamGroup g, Tensor t) { m.store.add(name, g, std::move(t)); };

    // ---- encoder group ----
    add("embed.tok", ParamGroup::encoder, Tensor::randn(cfg.vocab_size, h, rng, 0.02));
    add("embed.pos", ParamGroup::encoder, Tensor::randn(cfg.max_seq, h, rng, 0.02));
    add("obs.w1", ParamGroup::encoder, linear_w(cfg.obs_dim, h));
    add("obs.b1", ParamGroup::encoder, zeros_or_small(1, h));
    add("obs.w2", ParamGroup::encoder, linear_w(h, h));
    add("obs.b2", ParamGroup::encoder, zeros_or_small(1, h));
    add("obs.grid_w", ParamGroup::encoder, linear_w(cfg.patch_dim(), h));
    add("obs.grid_b", ParamGroup::encoder, zeros_or_small(1, h));
    auto add_block = [&](const std::string& prefix, ParamGroup g) {
      add(prefix + ".ln1.g", g, Tensor::full(1, h, 1.0));
      add(prefix + ".ln1.b", g, zeros_or_small(1, h));
      add(prefix + ".attn.wq", g, linear_w(h, h));
      add(prefix + ".attn.wk", g, linear_w(h, h));
      add(prefix + ".attn.wv", g, linear_w(h, h));
      add(prefix + ".attn.wo", g, linear_w(h, h));
      add(prefix + ".attn.bq", g, zeros_or_small(1, h));
      add(prefix + ".attn.bk", g, zeros_or_small(1, h));
      add(prefix + ".attn.bv", g, zeros_or_small(1, h));
      add(prefix + ".attn.bo", g, zeros_or_small(1, h));
      add(prefix + ".ln2.g", g, Tensor::full(1, h, 1.0));
      add(prefix + ".ln2.b", g, zeros_or_small(1, h));
      add(prefix + ".mlp.w1", g, linear_w(h, cfg.mlp_mult * h));
      add(prefix + ".mlp.b1", g, zeros_or_small(1, cfg.mlp_mult * h));
      add(prefix + ".mlp.w2", g, linear_w(cfg.mlp_mult * h, h));
      add(prefix + ".mlp.b2", g, zeros_or_small(1, h));
    };
    for (int i = 0; i < cfg.cond_blocks; ++i)
      add_block("cond.b" + std::to_string(i), ParamGroup::encoder);
    add("cond.lnf.g", ParamGroup::encoder, Tensor::full(1, h, 1.0));
    add("cond.lnf.b", ParamGroup::encoder, zeros_or_small(1, h));

    // ---- decoder group ----
    ProjectionConfig pc = cfg.projection_config();
    switch (cfg.projection) {
      case ProjectionKind::multi_mlp:
        for (std::size_t i = 0; i < cfg.proj_dims.size(); ++i) {
          int d = cfg.proj_dims[i].second;
          add("proj.enc.w.e" + std::to_string(i), ParamGroup::decoder, linear_w(d, h));
          add("proj.enc.b.e" + std::to_string(i), ParamGroup::decoder, zeros_or_small(1, h));
          add("proj.dec.w.e" + std::to_string(i), ParamGroup::decoder,
              rnd ? Tensor::randn(h, d, rng, 0.02) : Tensor::zeros(h, d));
          add("proj.dec.b.e" + std::to_string(i), ParamGroup::decoder, zeros_or_small(1, d));
        }
        break;
      case ProjectionKind::concat: {
        int D = pc.d_sum();
        add("proj.enc.w", ParamGroup::decoder, linear_w(D, h));
        add("proj.enc.b", ParamGroup::decoder, zeros_or_small(1, h));
        add("proj.dec.w", ParamGroup::decoder,
            rnd ? Tensor::randn(h, D, rng, 0.02) : Tensor::zeros(h, D));
        add("proj.dec.b", ParamGroup::decoder, zeros_or_small(1, D));
        break;
      }
      case ProjectionKind::zero_pad: {
        int dm = pc.d_max();
        add("proj.enc.w", ParamGroup::decoder, linear_w(dm, h));
        add("proj.enc.b", ParamGroup::decoder, zeros_or_small(1, h));
        add("proj.dec.w", ParamGroup::decoder,
            rnd ? Tensor::randn(h, dm, rng, 0.02) : Tensor::zeros(h, dm));
        add("proj.dec.b", ParamGroup::decoder, zeros_or_small(1, dm));
        break;
      }
    }
    add("act.pos", ParamGroup::decoder, Tensor::randn(cfg.horizon, h, rng, 0.02));
    add("time.w1", ParamGroup::decoder, linear_w(cfg.time_embed_dim, h));
    add("time.b1", ParamGroup::decoder, zeros_or_small(1, h));
    add("time.w2", ParamGroup::decoder, linear_w(h, h));
    add("time.b2", ParamGroup::decoder, zeros_or_small(1, h));
    for (int i = 0; i < cfg.dit_blocks; ++i) {
      std::string prefix = "dit.b" + std::to_string(i);
      add_block(prefix, ParamGroup::decoder);
      add(prefix + ".ada.w", ParamGroup::decoder,
          rnd ? Tensor::randn(h, 6 * h, rng, 0.02) : Tensor::zeros(h, 6 * h));
      add(prefix + ".ada.b", ParamGroup::decoder, zeros_or_small(1, 6 * h));
    }
    add("dit.lnf.g", ParamGroup::decoder, Tensor::full(1, h, 1.0));
    add("dit.lnf.b", ParamGroup::decoder, zeros_or_small(1, h));
    add("dit.final.ada.w", ParamGroup::decoder,
        rnd ? Tensor::randn(h, 2 * h, rng, 0.02) : Tensor::zeros(h, 2 * h));
    add("dit.final.ada.b", ParamGroup::decoder, zeros_or_small(1, 2 * h));
    if (cfg.state_in_decoder) {
      add("state.inject.w", ParamGroup::decoder, linear_w(cfg.state_inject_dim, h));
      add("state.inject.b", ParamGroup::decoder, zeros_or_small(1, h));
    }

    // ---- text head ----
    add("head.w", ParamGroup::text_head,
        rnd ? Tensor::randn(h, cfg.vocab_size, rng, 0.02) : Tensor::zeros(h, cfg.vocab_size));
    add("head.b", ParamGroup::text_head, zeros_or_small(1, cfg.vocab_size));

    for (auto& p : m.store.items()) p.value.round_to_f32();
    return m;
  }

  Var p(Tape& tape, const std::string& name, bool track = true) const {
    const Tensor& t = store.at(name).value;
    return track ? tape.leaf(t) : tape.constant(t);
  }

  bool all_finite() const {
    for (const auto& p : store.items())
      if (!p.value.finite()) return false;
    return true;
  }
};

// Count of projection weights (biases excluded), for the closed-form checks.
inline long projection_weight_count(const PolicyModel& m) {
  long n = 0;
  for (const auto& p : m.store.items())
    if (p.name.rfind("proj.", 0) == 0 && p.name.find(".w") != std::string::npos)
      n += static_cast<long>(p.value.size());
  return n;
}

}  // namespace flowact
