#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/rng.hpp"
#include "flowact/text/vocab.hpp"

namespace flowact {

// The six task template families plus the caption family used for the
// language-understanding objective.
enum class TemplateFamily {
  pick_place,
  push,
  pull,
  rotate_reposition,
  rotate_to_view,
  swap,
  scene_caption,
};

inline const char* family_name(TemplateFamily f) {
  switch (f) {
    case TemplateFamily::pick_place: return "pick-place";
    case TemplateFamily::push: return "push";
    case TemplateFamily::pull: return "pull";
    case TemplateFamily::rotate_reposition: return "rotate-reposition";
    case TemplateFamily::rotate_to_view: return "rotate-to-view";
    case TemplateFamily::swap: return "swap";
    case TemplateFamily::scene_caption: return "scene-caption";
  }
  return "?";
}

inline TemplateFamily family_from_name(const std::string& s) {
  for (TemplateFamily f : {TemplateFamily::pick_place, TemplateFamily::push, TemplateFamily::pull,
                           TemplateFamily::rotate_reposition, TemplateFamily::rotate_to_view,
                           TemplateFamily::swap, TemplateFamily::scene_caption})
    if (s == family_name(f)) return f;
  raise(ErrorKind::invalid_argument, "unknown template family: " + s);
}

inline const std::vector<TemplateFamily>& action_families() {
  static const std::vector<TemplateFamily> v = {
      TemplateFamily::pick_place,       TemplateFamily::push,
      TemplateFamily::pull,             TemplateFamily::rotate_reposition,
      TemplateFamily::rotate_to_view,   TemplateFamily::swap};
  return v;
}

// ---- slot word lists -------------------------------------------------------

inline const std::vector<std::string>& color_names() {
  static const std::vector<std::string> v = {"red", "blue", "green", "yellow"};
  return v;
}

inline const std::vector<std::string>& object_names() {
  static const std::vector<std::string> v = {"cube",   "ball",   "block", "bottle",
                                             "sponge", "marker", "disk",  "peg"};
  return v;
}

inline const std::vector<std::string>& container_names() {
  static const std::vector<std::string> v = {"bowl", "box", "plate", "tray", "cup"};
  return v;
}

inline const std::vector<std::string>& direction_names() {
  // left = -x, right = +x, front = -y (toward the viewer), back = +y
  static const std::vector<std::string> v = {"left", "right", "front", "back"};
  return v;
}

inline double direction_angle(const std::string& dir) {
  if (dir == "right") return 0.0;
  if (dir == "back") return M_PI / 2;
  if (dir == "left") return M_PI;
  if (dir == "front") return -M_PI / 2;
  raise(ErrorKind::invalid_argument, "unknown direction: " + dir);
}

inline const std::vector<std::string>& view_target_names() {
  static const std::vector<std::string> v = {"window", "door", "camera", "wall"};
  return v;
}

inline double view_target_angle(const std::string& t) {
  if (t == "door") return 0.0;
  if (t == "window") return M_PI / 2;
  if (t == "wall") return M_PI;
  if (t == "camera") return -M_PI / 2;
  raise(ErrorKind::invalid_argument, "unknown view target: " + t);
}

inline bool is_color_word(const std::string& w) {
  for (const auto& c : color_names())
    if (c == w) return true;
  return false;
}

// ---- productions -----------------------------------------------------------

struct Production {
  const char* pattern;
  bool holdout;  // reserved surface forms for the paraphrase OOD suite
};

inline const std::vector<Production>& productions(TemplateFamily f) {
  static const std::vector<Production> pick = {
      {"Place the {obj} into the {dst}.", false},
      {"Put the {obj} in the {dst}.", false},
      {"Move the {obj} into the {dst}.", false},
      {"Pick up the {obj} and place it into the {dst}.", false},
      {"Set the {obj} inside the {dst}.", false},
      {"Move the {obj} toward the {dst}.", false},
      {"Transfer the {obj} to the {dst}.", true},
      {"Drop the {obj} into the {dst}.", true},
  };
  static const std::vector<Production> push = {
      {"Push the {obj} to the {dir}.", false},
      {"Slide the {obj} to the {dir}.", false},
      {"Push the {obj} toward the {dir}.", false},
      {"Nudge the {obj} to the {dir}.", false},
      {"Shove the {obj} toward the {dir}.", false},
      {"Drive the {obj} to the {dir}.", true},
      {"Press the {obj} toward the {dir}.", true},
  };
  static const std::vector<Production> pull = {
      {"Pull the {obj} closer.", false},
      {"Drag the {obj} toward you.", false},
      {"Pull the {obj} toward you.", false},
      {"Draw the {obj} nearer.", false},
      {"Drag the {obj} closer.", false},
      {"Tug the {obj} toward you.", true},
      {"Haul the {obj} nearer.", true},
  };
  static const std::vector<Production> rotrep = {
      {"Rotate the {obj} and move it to the {dst}.", false},
      {"Turn the {obj} and place it in the {dst}.", false},
      {"Rotate the {obj} and put it into the {dst}.", false},
      {"Spin the {obj} and move it to the {dst}.", false},
      {"Turn the {obj} and set it in the {dst}.", false},
      {"Twist the {obj} and move it to the {dst}.", true},
      {"Rotate the {obj} and drop it into the {dst}.", true},
  };
  static const std::vector<Production> rotview = {
      {"Rotate the {obj} to face the {target}.", false},
      {"Turn the {obj} toward the {target}.", false},
      {"Rotate the {obj} toward the {target}.", false},
      {"Turn the {obj} to face the {target}.", false},
      {"Point the {obj} at the {target}.", false},
      {"Aim the {obj} at the {target}.", true},
      {"Orient the {obj} toward the {target}.", true},
  };
  static const std::vector<Production> swap = {
      {"Swap the {obj_a} and the {obj_b}.", false},
      {"Exchange the {obj_a} and the {obj_b}.", false},
      {"Swap the positions of the {obj_a} and the {obj_b}.", false},
      {"Switch the {obj_a} and the {obj_b}.", false},
      {"Exchange the positions of the {obj_a} and the {obj_b}.", false},
      {"Trade the places of the {obj_a} and the {obj_b}.", true},
      {"Switch the positions of the {obj_a} and the {obj_b}.", true},
  };
  static const std::vector<Production> none = {};
  switch (f) {
    case TemplateFamily::pick_place: return pick;
    case TemplateFamily::push: return push;
    case TemplateFamily::pull: return pull;
    case TemplateFamily::rotate_reposition: return rotrep;
    case TemplateFamily::rotate_to_view: return rotview;
    case TemplateFamily::swap: return swap;
    case TemplateFamily::scene_caption: return none;
  }
  return none;
}

inline const std::vector<std::string>& family_required_slots(TemplateFamily f) {
  static const std::vector<std::string> pick = {"obj", "dst"};
  static const std::vector<std::string> push = {"obj", "dir"};
  static const std::vector<std::string> pull = {"obj"};
  static const std::vector<std::string> rotrep = {"obj", "dst"};
  static const std::vector<std::string> rotview = {"obj", "target"};
  static const std::vector<std::string> swap = {"obj_a", "obj_b"};
  static const std::vector<std::string> none = {};
  switch (f) {
    case TemplateFamily::pick_place: return pick;
    case TemplateFamily::push: return push;
    case TemplateFamily::pull: return pull;
    case TemplateFamily::rotate_reposition: return rotrep;
    case TemplateFamily::rotate_to_view: return rotview;
    case TemplateFamily::swap: return swap;
    case TemplateFamily::scene_caption: return none;
  }
  return none;
}

// ---- instruction -----------------------------------------------------------

struct Instruction {
  std::string text;
  TemplateFamily family = TemplateFamily::pick_place;
  std::map<std::string, std::string> slots;
  std::vector<int> token_ids;

  // Surface form for prompt interpolation: the template appends its own
  // final period.
  std::string prompt_form() const {
    std::string s = text;
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }
};

enum class ProductionSet { train, holdout, all };

namespace detail {

inline std::string expand_slot(const std::string& key,
                               const std::map<std::string, std::string>& slots) {
  auto it = slots.find(key);
  if (it == slots.end())
    raise(ErrorKind::invalid_argument, "compose_instruction: missing slot '" + key + "'");
  auto color = slots.find(key + "_color");
  if (color != slots.end() && !color->second.empty()) return color->second + " " + it->second;
  return it->second;
}

inline std::string instantiate(const std::string& pattern,
                               const std::map<std::string, std::string>& slots) {
  std::string out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] == '{') {
      auto j = pattern.find('}', i);
      if (j == std::string::npos)
        raise(ErrorKind::invalid_argument, "bad production pattern: " + pattern);
      out += expand_slot(pattern.substr(i + 1, j - i - 1), slots);
      i = j + 1;
    } else {
      out += pattern[i++];
    }
  }
  return out;
}

}  // namespace detail

inline Instruction compose_instruction(TemplateFamily family,
                                       const std::map<std::string, std::string>& slots,
                                       std::uint64_t seed, const Vocabulary& vocab,
                                       ProductionSet set = ProductionSet::train) {
  if (family == TemplateFamily::scene_caption)
    raise(ErrorKind::invalid_argument, "scene captions come from generate_scene_caption");
  for (const auto& req : family_required_slots(family))
    if (!slots.count(req))
      raise(ErrorKind::invalid_argument,
            std::string("compose_instruction: missing slot '") + req + "'");

  std::vector<int> pool;
  const auto& prods = productions(family);
  for (std::size_t i = 0; i < prods.size(); ++i) {
    if (set == ProductionSet::all || (set == ProductionSet::train && !prods[i].holdout) ||
        (set == ProductionSet::holdout && prods[i].holdout))
      pool.push_back(static_cast<int>(i));
  }
  Rng rng(derive_seed(seed, "compose", static_cast<std::uint64_t>(family)));
  int pick = pool[rng.uniform_index(pool.size())];

  Instruction ins;
  ins.family = family;
  ins.slots = slots;
  ins.text = detail::instantiate(prods[pick].pattern, slots);
  ins.token_ids = tokenize(ins.text, vocab);
  return ins;
}

// ---- parsing (slot recovery) ----------------------------------------------

namespace detail {

struct PatternPiece {
  bool is_slot = false;
  std::string word;  // literal word or slot key
};

inline std::vector<PatternPiece> pattern_pieces(const std::string& pattern) {
  std::vector<PatternPiece> out;
  for (const auto& w : split_words(pattern)) {
    if (w.front() == '{' && w.back() == '}') {
      out.push_back({true, w.substr(1, w.size() - 2)});
    } else {
      out.push_back({false, w});
    }
  }
  return out;
}

inline bool match_pieces(const std::vector<PatternPiece>& pieces, std::size_t pi,
                         const std::vector<std::string>& words, std::size_t wi,
                         std::map<std::string, std::string>& slots) {
  if (pi == pieces.size()) return wi == words.size();
  const auto& piece = pieces[pi];
  if (!piece.is_slot) {
    if (wi >= words.size() || words[wi] != piece.word) return false;
    return match_pieces(pieces, pi + 1, words, wi + 1, slots);
  }
  // slot: consume "color name" or just "name"
  if (wi < words.size() && is_color_word(words[wi]) && wi + 1 < words.size()) {
    slots[piece.word + "_color"] = words[wi];
    slots[piece.word] = words[wi + 1];
    if (match_pieces(pieces, pi + 1, words, wi + 2, slots)) return true;
    slots.erase(piece.word + "_color");
  }
  if (wi < words.size()) {
    slots[piece.word] = words[wi];
    if (match_pieces(pieces, pi + 1, words, wi + 1, slots)) return true;
    slots.erase(piece.word);
  }
  return false;
}

}  // namespace detail

// Recover (family, slots) from a surface form; tries every production of
// every action family.
inline std::optional<Instruction> parse_instruction(const std::string& text,
                                                    const Vocabulary& vocab,
                                                    ProductionSet set = ProductionSet::all) {
  const auto words = split_words(text);
  for (TemplateFamily f : action_families()) {
    const auto& prods = productions(f);
    for (const auto& p : prods) {
      if (set == ProductionSet::train && p.holdout) continue;
      if (set == ProductionSet::holdout && !p.holdout) continue;
      auto pieces = detail::pattern_pieces(p.pattern);
      std::map<std::string, std::string> slots;
      if (detail::match_pieces(pieces, 0, words, 0, slots)) {
        Instruction ins;
        ins.family = f;
        ins.slots = std::move(slots);
        ins.text = canonical_text(text);
        ins.token_ids = tokenize(ins.text, vocab);
        return ins;
      }
    }
  }
  return std::nullopt;
}

// Every production surface of a family instantiated with one slot set; used
// by the paraphrase OOD check.
inline std::vector<std::string> enumerate_surfaces(TemplateFamily family,
                                                   const std::map<std::string, std::string>& slots,
                                                   ProductionSet set) {
  std::vector<std::string> out;
  for (const auto& p : productions(family)) {
    if (set == ProductionSet::train && p.holdout) continue;
    if (set == ProductionSet::holdout && !p.holdout) continue;
    out.push_back(detail::instantiate(p.pattern, slots));
  }
  return out;
}

// ---- vocabulary construction ----------------------------------------------

// All words any generator can emit: production literals, slot fillers,
// caption literals, the embodiment prompt template, numbers, robot tags.
inline std::vector<std::string> grammar_word_list() {
  std::vector<std::string> words;
  auto add_text = [&](const std::string& t) {
    for (const auto& w : split_words(t)) words.push_back(w);
  };
  for (TemplateFamily f : action_families())
    for (const auto& p : productions(f)) {
      for (const auto& w : split_words(p.pattern))
        if (w.front() != '{') words.push_back(w);
    }
  for (const auto& w : color_names()) words.push_back(w);
  for (const auto& w : object_names()) words.push_back(w);
  for (const auto& w : container_names()) words.push_back(w);
  for (const auto& w : direction_names()) words.push_back(w);
  for (const auto& w : view_target_names()) words.push_back(w);
  words.push_back("robot");
  words.push_back("beacon");
  words.push_back("cart");
  // caption literals
  add_text("the scene contains a is left of right in front behind near and rests on the table");
  // embodiment prompt template
  add_text("The robot is with single arm dual arms , waist and mobile base . "
           "The control frequency is Hz . Please predict the next control actions "
           "to execute the following task :");
  for (const char* n : {"2", "4", "8", "10", "16", "32", "50"}) words.push_back(n);
  for (const char* tag : {"point-gripper", "planar-arm-2dof", "planar-arm-3dof",
                          "planar-navigator", "toy-gripper"})
    words.push_back(tag);
  return words;
}

inline const Vocabulary& default_vocabulary() {
  static const Vocabulary v(grammar_word_list(), /*with_state_tokens=*/true);
  return v;
}

}  // namespace flowact
