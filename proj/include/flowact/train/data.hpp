#pragma once

#include <map>
#include <string>
#include <vector>

#include "flowact/core/chunk.hpp"
#include "flowact/core/prompt.hpp"
#include "flowact/datagen/corpus.hpp"
#include "flowact/datagen/pseudo.hpp"
#include "flowact/policy/conditioning.hpp"
#include "flowact/text/caption.hpp"
#include "flowact/train/config.hpp"
#include "flowact/train/mixer.hpp"

namespace flowact {

struct ActionSample {
  Conditioning cond;
  Tensor y0;  // H x K, normalized, zero outside the mask
  ChunkMask mask;
};

struct VlSample {
  std::vector<int> caption_ids;
  std::vector<ObsSlot> obs;
};

struct TrainDataOptions {
  bool with_obs = true;          // off at T2A (vision-free contract)
  bool full_sequence = false;    // T2A full-sequence mode
  double obs_noise_std = 0.01;   // matches the env featurizer's default
  bool state_tokens = false;     // prompt-side state injection
  bool state_in_decoder = false; // decoder-side state injection
};

// Training-sample factory over a generated corpus. Mix sources are the
// per-dataset action pools plus one caption pool derived from manipulation
// scenes.
class TrainData {
 public:
  TrainData(const Corpus& corpus, const Vocabulary& vocab, TrainDataOptions opts)
      : corpus_(&corpus), vocab_(&vocab), opts_(opts) {
    for (const auto& ep : corpus.episodes) {
      auto it = index_.find(ep.dataset_id);
      if (it == index_.end()) {
        index_[ep.dataset_id] = static_cast<int>(groups_.size());
        groups_.push_back({});
        group_names_.push_back(ep.dataset_id);
      }
      groups_[index_[ep.dataset_id]].push_back(&ep);
      if (!ep.views.empty()) has_view_tracks_ = true;
      if (ep.family != "rotate-to-view" || ep.embodiment_id != "planar-navigator") {
        const EmbodimentSpec& es = embodiment(ep.embodiment_id);
        if (state_layout(es).has_grip) caption_pool_.push_back(&ep);
      }
    }
  }

  bool has_view_tracks() const { return has_view_tracks_; }
  int action_source_count() const { return static_cast<int>(groups_.size()); }
  const std::string& action_source_name(int i) const { return group_names_[i]; }
  int action_source_size(int i) const { return static_cast<int>(groups_[i].size()); }
  int caption_pool_size() const { return static_cast<int>(caption_pool_.size()); }

  std::vector<MixSource> mix_sources(double vl_weight) const {
    std::vector<MixSource> out;
    const double action_total = 1.0 - vl_weight;
    for (std::size_t i = 0; i < groups_.size(); ++i)
      out.push_back({group_names_[i], static_cast<int>(groups_[i].size()),
                     action_total / static_cast<double>(groups_.size())});
    out.push_back({"vl", static_cast<int>(caption_pool_.size()), vl_weight});
    return out;
  }

  ActionSample make_action_sample(int source, int item, std::uint64_t seed) const {
    const Episode& ep = *groups_[source][item];
    const EmbodimentSpec& es = embodiment(ep.embodiment_id);
    const NormalizerStats& stats = corpus_->normalizers.get(ep.dataset_id);
    Rng rng(derive_seed(seed, "action-sample"));

    std::vector<std::vector<double>> rows;
    int t0 = 0;
    if (opts_.full_sequence) {
      rows = full_sequence_rows(ep, es);
    } else {
      const int n = ep.num_actions();
      t0 = static_cast<int>(rng.uniform_index(n));
      const int take = std::min(es.default_horizon, n - t0);
      for (int h = 0; h < take; ++h) {
        const float* a = ep.action_row(t0 + h);
        rows.push_back(std::vector<double>(a, a + ep.action_dim));
      }
    }

    ActionSample s;
    s.mask = build_mask(es.native_dim, static_cast<int>(rows.size()));
    s.y0 = Tensor::zeros(kHorizon, kChannelCap);
    for (std::size_t h = 0; h < rows.size(); ++h) {
      auto norm = normalize_actions(rows[h], stats);
      for (int k = 0; k < es.native_dim; ++k) s.y0.at(static_cast<int>(h), k) = norm[k];
    }

    s.cond.embodiment_id = ep.embodiment_id;
    auto parsed = parse_instruction(ep.instruction, *vocab_);
    std::string instr = parsed ? parsed->prompt_form() : canonical_text(ep.instruction);
    if (!instr.empty() && instr.back() == '.') instr.pop_back();
    auto prompt = render_embodiment_prompt(es, instr, es.default_horizon);
    s.cond.prompt_tokens = tokenize(prompt, *vocab_);

    if (opts_.with_obs) {
      Rng noise(derive_seed(seed, "obs-sample"));
      const float* row = ep.state_row(t0);
      Tensor feat(1, ep.state_dim);
      for (int i = 0; i < ep.state_dim; ++i)
        feat.at(0, i) = to_f32(row[i] + opts_.obs_noise_std * noise.normal());
      s.cond.obs.push_back({"ego", std::move(feat)});
    }
    if (opts_.state_tokens || opts_.state_in_decoder) {
      const StateLayout layout = state_layout(es);
      const float* row = ep.state_row(t0);
      const int sdim = layout.objects_offset();  // proprioceptive prefix
      if (opts_.state_tokens) {
        s.cond.prompt_tokens.pop_back();  // reopen before <|end|>
        s.cond.prompt_tokens.push_back(vocab_->state_marker());
        for (int i = 0; i < sdim; ++i)
          s.cond.prompt_tokens.push_back(vocab_->state_bin(quantize_state(row[i])));
        s.cond.prompt_tokens.push_back(Vocabulary::kEnd);
      } else {
        for (int i = 0; i < sdim; ++i) s.cond.state_vec.push_back(row[i]);
      }
    }
    return s;
  }

  VlSample make_vl_sample(int item, std::uint64_t seed) const {
    const Episode& ep = *caption_pool_[item];
    auto scene = scene_from_episode(ep, 0, *vocab_);
    if (!scene) raise(ErrorKind::data_error, "vl sample: unparseable episode " + ep.id);
    auto caption = generate_scene_caption(*scene, derive_seed(seed, "caption-pick"), *vocab_);

    VlSample s;
    s.caption_ids = caption.token_ids;
    Rng noise(derive_seed(seed, "vl-obs"));
    const float* row = ep.state_row(0);
    Tensor feat(1, ep.state_dim);
    for (int i = 0; i < ep.state_dim; ++i)
      feat.at(0, i) = to_f32(row[i] + opts_.obs_noise_std * noise.normal());
    s.obs.push_back({"ego", std::move(feat)});
    return s;
  }

  // 256-bin uniform quantization over a fixed [-2, 2) range.
  static int quantize_state(double x) {
    int b = static_cast<int>((x + 2.0) / 4.0 * 256.0);
    return std::min(255, std::max(0, b));
  }

 private:
  // Whole trajectory resampled onto the H grid: delta channels average over
  // each window (preserving per-step scale), absolute channels take the
  // window's final setpoint.
  std::vector<std::vector<double>> full_sequence_rows(const Episode& ep,
                                                      const EmbodimentSpec& es) const {
    const int n = ep.num_actions();
    const int h_task = std::min(es.default_horizon, n);
    const StateLayout layout = state_layout(es);
    std::vector<std::vector<double>> rows;
    for (int w = 0; w < h_task; ++w) {
      const int lo = static_cast<int>(static_cast<long>(w) * n / h_task);
      const int hi = static_cast<int>(static_cast<long>(w + 1) * n / h_task);
      std::vector<double> row(ep.action_dim, 0.0);
      for (int k = 0; k < ep.action_dim; ++k) {
        if (es.control_mode == ControlMode::abs_joint ||
            (layout.has_grip && k == ep.action_dim - 1)) {
          row[k] = ep.action_row(hi - 1)[k];  // setpoint at window end
        } else {
          double sum = 0.0;
          for (int t = lo; t < hi; ++t) sum += ep.action_row(t)[k];
          row[k] = sum / (hi - lo);
        }
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

  const Corpus* corpus_;
  const Vocabulary* vocab_;
  TrainDataOptions opts_;
  std::map<std::string, int> index_;
  std::vector<std::vector<const Episode*>> groups_;
  std::vector<std::string> group_names_;
  std::vector<const Episode*> caption_pool_;
  bool has_view_tracks_ = false;
};

}  // namespace flowact
