#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/rng.hpp"
#include "flowact/scene.hpp"
#include "flowact/text/grammar.hpp"

namespace flowact {

// Spatial relations over scene coordinates. "front" is toward the viewer
// (smaller y); "left" is smaller x.
enum class SpatialRelation { left_of, right_of, in_front_of, behind, near };

inline const char* relation_surface(SpatialRelation r) {
  switch (r) {
    case SpatialRelation::left_of: return "is left of";
    case SpatialRelation::right_of: return "is right of";
    case SpatialRelation::in_front_of: return "is in front of";
    case SpatialRelation::behind: return "is behind";
    case SpatialRelation::near: return "is near";
  }
  return "?";
}

inline constexpr double kRelationMargin = 0.02;
inline constexpr double kNearDistance = 0.15;

inline bool relation_holds(SpatialRelation r, const SceneObject& a, const SceneObject& b) {
  switch (r) {
    case SpatialRelation::left_of: return a.x < b.x - kRelationMargin;
    case SpatialRelation::right_of: return a.x > b.x + kRelationMargin;
    case SpatialRelation::in_front_of: return a.y < b.y - kRelationMargin;
    case SpatialRelation::behind: return a.y > b.y + kRelationMargin;
    case SpatialRelation::near:
      return std::hypot(a.x - b.x, a.y - b.y) <= kNearDistance;
  }
  return false;
}

// A parsed caption: zero or more "contains" clauses and at most one
// pairwise relation clause.
struct CaptionPredicate {
  struct Mention {
    std::string color, name;
  };
  std::vector<Mention> contains;
  bool has_relation = false;
  Mention rel_a, rel_b;
  SpatialRelation relation = SpatialRelation::near;

  bool evaluate(const Scene& scene) const {
    for (const auto& m : contains)
      if (!scene.find(m.color, m.name)) return false;
    if (has_relation) {
      const SceneObject* a = scene.find(rel_a.color, rel_a.name);
      const SceneObject* b = scene.find(rel_b.color, rel_b.name);
      if (!a || !b) return false;
      if (!relation_holds(relation, *a, *b)) return false;
    }
    return true;
  }
};

// Caption generation: states each object's color and name; includes one
// pairwise relation that the scene satisfies (true by construction).
inline Instruction generate_scene_caption(const Scene& scene, std::uint64_t seed,
                                          const Vocabulary& vocab) {
  if (scene.objects.empty())
    raise(ErrorKind::invalid_argument, "generate_scene_caption: empty scene");
  Rng rng(derive_seed(seed, "caption"));

  std::string text;
  if (scene.objects.size() == 1) {
    const auto& o = scene.objects[0];
    text = (rng.uniform() < 0.5)
               ? "the scene contains a " + o.color + " " + o.name
               : "a " + o.color + " " + o.name + " rests on the table";
  } else {
    // pick an ordered pair and a relation that holds for it
    std::size_t ia = rng.uniform_index(scene.objects.size());
    std::size_t ib = rng.uniform_index(scene.objects.size() - 1);
    if (ib >= ia) ++ib;
    const auto& a = scene.objects[ia];
    const auto& b = scene.objects[ib];
    std::vector<SpatialRelation> all = {SpatialRelation::left_of, SpatialRelation::right_of,
                                        SpatialRelation::in_front_of, SpatialRelation::behind,
                                        SpatialRelation::near};
    std::vector<SpatialRelation> holds;
    for (auto r : all)
      if (relation_holds(r, a, b)) holds.push_back(r);
    SpatialRelation rel = holds[rng.uniform_index(holds.size())];
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      if (i == ia || i == ib) continue;
      const auto& o = scene.objects[i];
      text += "the scene contains a " + o.color + " " + o.name + " and ";
    }
    text += "the " + a.color + " " + a.name + " " + relation_surface(rel) + " the " + b.color +
            " " + b.name;
  }

  Instruction ins;
  ins.family = TemplateFamily::scene_caption;
  ins.text = text;
  ins.token_ids = tokenize(text, vocab);
  return ins;
}

// Parse a caption back into a predicate. Returns nullopt on anything that is
// not caption-shaped.
inline std::optional<CaptionPredicate> parse_caption(const std::string& text) {
  auto words = split_words(text);
  CaptionPredicate pred;
  std::size_t i = 0;
  auto take_mention = [&](CaptionPredicate::Mention& m) -> bool {
    if (i + 1 >= words.size()) return false;
    if (!is_color_word(words[i])) return false;
    m.color = words[i];
    m.name = words[i + 1];
    i += 2;
    return true;
  };
  while (i < words.size()) {
    if (i + 3 < words.size() && words[i] == "the" && words[i + 1] == "scene" &&
        words[i + 2] == "contains" && words[i + 3] == "a") {
      i += 4;
      CaptionPredicate::Mention m;
      if (!take_mention(m)) return std::nullopt;
      pred.contains.push_back(m);
    } else if (i + 1 < words.size() && words[i] == "a" && is_color_word(words[i + 1])) {
      ++i;
      CaptionPredicate::Mention m;
      if (!take_mention(m)) return std::nullopt;
      // "... rests on the table"
      if (i + 3 < words.size() && words[i] == "rests") i += 4;
      pred.contains.push_back(m);
    } else if (words[i] == "the") {
      ++i;
      CaptionPredicate::Mention a;
      if (!take_mention(a)) return std::nullopt;
      if (i >= words.size() || words[i] != "is") return std::nullopt;
      ++i;
      if (i >= words.size()) return std::nullopt;
      auto at = [&](std::size_t j) { return j < words.size() ? words[j] : std::string(); };
      SpatialRelation rel;
      if (at(i) == "left" && at(i + 1) == "of") { rel = SpatialRelation::left_of; i += 2; }
      else if (at(i) == "right" && at(i + 1) == "of") { rel = SpatialRelation::right_of; i += 2; }
      else if (at(i) == "in" && at(i + 1) == "front" && at(i + 2) == "of") {
        rel = SpatialRelation::in_front_of; i += 3;
      } else if (at(i) == "behind") { rel = SpatialRelation::behind; ++i; }
      else if (at(i) == "near") { rel = SpatialRelation::near; ++i; }
      else return std::nullopt;
      if (i >= words.size() || words[i] != "the") return std::nullopt;
      ++i;
      CaptionPredicate::Mention b;
      if (!take_mention(b)) return std::nullopt;
      pred.has_relation = true;
      pred.rel_a = a;
      pred.rel_b = b;
      pred.relation = rel;
    } else if (words[i] == "and") {
      ++i;
    } else {
      return std::nullopt;
    }
  }
  if (pred.contains.empty() && !pred.has_relation) return std::nullopt;
  return pred;
}

}  // namespace flowact
