#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowact/datagen/cleaning.hpp"
#include "flowact/datagen/planner.hpp"
#include "flowact/datagen/tasks.hpp"

namespace flowact {

struct CorpusSpec {
  std::vector<std::string> embodiments;  // empty: all toy embodiments
  int episodes_per_combo = 20;           // per (embodiment, family) pair
  std::uint64_t seed = 0;
  bool real_profile = false;
  std::string corpus_tag = "syn";
  TaskSamplerOptions sampler;
};

struct Corpus {
  std::vector<Episode> episodes;
  NormalizerTable normalizers;
  // length bounds are per (dataset, family) group: families differ widely in
  // step count (a swap takes three transports; navigation runs at 2 Hz)
  std::map<std::string, std::pair<double, double>> length_bounds;

  static std::string group_key(const Episode& ep) { return ep.dataset_id + "|" + ep.family; }

  CleaningThresholds thresholds_for(const Episode& ep) const {
    CleaningThresholds th;
    th.variance_floor = 1e-6;
    auto it = length_bounds.find(group_key(ep));
    if (it != length_bounds.end()) {
      th.len_min = it->second.first;
      th.len_max = it->second.second;
    }
    if (normalizers.has(ep.dataset_id)) th.stats = &normalizers.get(ep.dataset_id);
    return th;
  }
};

// Samples tasks, plans trajectories, fits per-dataset quantile stats and runs
// the cleaning filters. Serial loop in canonical (embodiment, family, index)
// order, so output is reproducible byte for byte.
inline Corpus generate_corpus(const CorpusSpec& spec, const Vocabulary& vocab) {
  Corpus out;
  std::vector<std::string> embs = spec.embodiments;
  if (embs.empty())
    for (const auto& e : toy_embodiments()) embs.push_back(e.robot_tag);

  for (const auto& emb : embs) {
    const EmbodimentSpec& es = embodiment(emb);
    for (TemplateFamily fam : action_families()) {
      if (!family_supported(fam, es)) continue;
      for (int i = 0; i < spec.episodes_per_combo; ++i) {
        std::uint64_t base =
            derive_seed(spec.seed, "corpus", fnv1a64(emb) ^ static_cast<std::uint64_t>(fam), i);
        Episode ep;
        bool got = false;
        for (int retry = 0; retry < 16 && !got; ++retry) {
          try {
            auto inst = sample_task_instance(fam, emb, base + retry, vocab, spec.sampler);
            PlannerOptions popt;
            popt.real_profile = spec.real_profile;
            popt.dataset_id = spec.corpus_tag;
            ep = plan_trajectory(inst, vocab, popt);
            got = true;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::planning_failure) throw;
          }
        }
        if (!got)
          raise(ErrorKind::planning_failure,
                "generate_corpus: repeated planning failures for " + emb);
        out.episodes.push_back(std::move(ep));
      }
    }
  }

  // per-dataset quantile stats from the raw corpus
  std::map<std::string, std::vector<std::vector<double>>> rows;
  for (const auto& ep : out.episodes)
    for (int t = 0; t < ep.num_actions(); ++t) {
      const float* a = ep.action_row(t);
      rows[ep.dataset_id].push_back(std::vector<double>(a, a + ep.action_dim));
    }
  for (const auto& [id, samples] : rows) out.normalizers.put(fit_normalizer(samples, id));

  std::map<std::string, std::vector<int>> group_lengths;
  for (const auto& ep : out.episodes) group_lengths[Corpus::group_key(ep)].push_back(ep.num_states());
  for (const auto& [key, lengths] : group_lengths) {
    if (lengths.size() < 8) continue;  // too few samples for robust bounds
    double lo, hi;
    length_bounds_from_corpus(lengths, 4.0, lo, hi);
    out.length_bounds[key] = {lo, hi};
  }

  std::vector<Episode> kept;
  for (auto& ep : out.episodes)
    if (clean_episode(ep, out.thresholds_for(ep)).accept) kept.push_back(std::move(ep));
  out.episodes = std::move(kept);
  return out;
}

// Rebuilds the symbolic scene at step t of an episode: positions come from
// the state row, names from the parsed instruction (block order follows the
// task sampler: primary object first, container/partner second).
inline std::optional<Scene> scene_from_episode(const Episode& ep, int t, const Vocabulary& vocab) {
  const EmbodimentSpec& spec = embodiment(ep.embodiment_id);
  const StateLayout layout = state_layout(spec);
  auto parsed = parse_instruction(ep.instruction, vocab);
  if (!parsed) return std::nullopt;

  std::vector<std::string> names;
  const auto& s = parsed->slots;
  if (s.count("obj_a")) {
    names.push_back(s.at("obj_a"));
    names.push_back(s.at("obj_b"));
  } else if (s.count("obj")) {
    names.push_back(s.at("obj"));
    if (s.count("dst")) names.push_back(s.at("dst"));
  }

  Scene scene;
  const float* row = ep.state_row(t);
  for (int i = 0; i < StateLayout::kMaxObjects; ++i) {
    int off = layout.object_offset(i);
    if (row[off + 3] < 0.5) continue;
    SceneObject o;
    o.x = row[off + 0];
    o.y = row[off + 1];
    o.yaw = row[off + 2];
    int ci = 0;
    for (int c = 1; c < 4; ++c)
      if (row[off + 4 + c] > row[off + 4 + ci]) ci = c;
    o.color = color_names()[ci];
    o.name = i < static_cast<int>(names.size()) ? names[i] : "block";
    scene.objects.push_back(o);
  }
  if (scene.objects.empty()) return std::nullopt;
  return scene;
}

}  // namespace flowact
