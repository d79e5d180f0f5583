#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "flowact/core/prompt.hpp"
#include "flowact/text/caption.hpp"
#include "flowact/text/grammar.hpp"
#include "flowact/text/views.hpp"
#include "flowact/text/vocab.hpp"

using namespace flowact;

TEST_CASE("vocabulary layout and persistence") {
  const auto& v = default_vocabulary();
  CHECK(v.size() <= 512);
  CHECK(v.token(Vocabulary::kPad) == "<|pad|>");
  CHECK(v.token(Vocabulary::kBegin) == "<|begin|>");
  CHECK(v.token(Vocabulary::kEnd) == "<|end|>");
  // special ids sit below ordinary words
  CHECK(v.view_start("ego") < v.first_word_id());
  CHECK(v.state_bin(0) < v.first_word_id());
  CHECK(v.state_bin(255) < v.first_word_id());

  auto v2 = Vocabulary::from_text(v.to_text());
  CHECK(v2.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(v2.token(i) == v.token(i));
  CHECK(v2.first_word_id() == v.first_word_id());
}

TEST_CASE("tokenize round trip and specials") {
  const auto& v = default_vocabulary();
  auto empty = tokenize("", v);
  REQUIRE(empty.size() == 2);
  CHECK(empty[0] == Vocabulary::kBegin);
  CHECK(empty[1] == Vocabulary::kEnd);

  std::string s = "Place the apple into the container.";
  // 'apple' and 'container' are not vocabulary words; use grammar words
  s = "Place the cube into the bowl.";
  auto ids = tokenize(s, v);
  CHECK(static_cast<int>(ids.size()) == 6 + 2 + 1);  // words + specials + period
  CHECK(detokenize(ids, v) == s);

  CHECK_THROWS_AS(tokenize("Place the zorp.", v), Error);
  try {
    tokenize("Place the zorp.", v);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("zorp") != std::string::npos);
  }
}

TEST_CASE("composed instructions round trip through the tokenizer") {
  const auto& v = default_vocabulary();
  std::map<std::string, std::string> slots = {
      {"obj", "cube"}, {"obj_color", "red"}, {"dst", "bowl"}, {"dst_color", "blue"}};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto ins = compose_instruction(TemplateFamily::pick_place, slots, seed, v);
    CHECK(detokenize(ins.token_ids, v) == ins.text);
  }
}

TEST_CASE("compose_instruction determinism and spec example shape") {
  const auto& v = default_vocabulary();
  std::map<std::string, std::string> slots = {{"obj", "cube"}, {"dst", "bowl"}};
  auto a = compose_instruction(TemplateFamily::pick_place, slots, 7, v);
  auto b = compose_instruction(TemplateFamily::pick_place, slots, 7, v);
  CHECK(a.text == b.text);
  CHECK(a.token_ids == b.token_ids);

  CHECK_THROWS_AS(compose_instruction(TemplateFamily::pick_place, {{"obj", "cube"}}, 1, v), Error);
}

TEST_CASE("surface diversity: >= 5 distinct forms per family over 1000 seeds") {
  const auto& v = default_vocabulary();
  for (TemplateFamily f : action_families()) {
    std::map<std::string, std::string> slots = {
        {"obj", "cube"},  {"dst", "bowl"},     {"dir", "left"},
        {"target", "window"}, {"obj_a", "cube"}, {"obj_b", "ball"}};
    std::set<std::string> forms;
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
      forms.insert(compose_instruction(f, slots, seed, v).text);
    CHECK(forms.size() >= 5);
  }
}

TEST_CASE("slots recoverable by parsing the surface form") {
  const auto& v = default_vocabulary();
  std::map<std::string, std::string> slots = {
      {"obj", "marker"}, {"obj_color", "green"}, {"dst", "tray"}};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto ins = compose_instruction(TemplateFamily::pick_place, slots, seed, v);
    auto parsed = parse_instruction(ins.text, v);
    REQUIRE(parsed.has_value());
    CHECK(parsed->family == TemplateFamily::pick_place);
    CHECK(parsed->slots.at("obj") == "marker");
    CHECK(parsed->slots.at("obj_color") == "green");
    CHECK(parsed->slots.at("dst") == "tray");
  }

  auto swap = compose_instruction(TemplateFamily::swap,
                                  {{"obj_a", "cube"}, {"obj_a_color", "red"},
                                   {"obj_b", "ball"}, {"obj_b_color", "blue"}},
                                  3, v);
  auto p = parse_instruction(swap.text, v);
  REQUIRE(p.has_value());
  CHECK(p->family == TemplateFamily::swap);
  CHECK(p->slots.at("obj_a") == "cube");
  CHECK(p->slots.at("obj_b") == "ball");
}

TEST_CASE("holdout productions are disjoint from training surfaces") {
  std::map<std::string, std::string> slots = {
      {"obj", "cube"},  {"dst", "bowl"},     {"dir", "left"},
      {"target", "window"}, {"obj_a", "cube"}, {"obj_b", "ball"}};
  for (TemplateFamily f : action_families()) {
    auto train = enumerate_surfaces(f, slots, ProductionSet::train);
    auto hold = enumerate_surfaces(f, slots, ProductionSet::holdout);
    CHECK(!hold.empty());
    for (const auto& h : hold)
      for (const auto& t : train) CHECK(h != t);
  }
}

TEST_CASE("tagged observation streams") {
  const auto& v = default_vocabulary();
  Tensor feat(3, 4);
  auto stream = tag_observation_stream({{"ego", feat}}, v);
  REQUIRE(stream.size() == 3);
  CHECK(stream[0].token_id == v.view_start("ego"));
  CHECK_FALSE(stream[1].is_token());
  CHECK(stream[1].features.rows == 3);
  CHECK(stream[2].token_id == v.view_end("ego"));
  CHECK(tagged_stream_length(stream) == 5);

  CHECK(tag_observation_stream({}, v).empty());

  // canonical ordering regardless of input order
  Tensor f2(1, 4);
  auto a = tag_observation_stream({{"ego", feat}, {"wrist_left", f2}}, v);
  auto b = tag_observation_stream({{"wrist_left", f2}, {"ego", feat}}, v);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].token_id == b[i].token_id);

  CHECK_THROWS_AS(tag_observation_stream({{"nose_cam", feat}}, v), Error);
  CHECK_THROWS_AS(tag_observation_stream({{"ego", feat}, {"ego", f2}}, v), Error);
}

TEST_CASE("boundary pairing in tagged streams") {
  const auto& v = default_vocabulary();
  Tensor feat(2, 4);
  auto stream = tag_observation_stream(
      {{"ego", feat}, {"wrist_left", feat}, {"wrist_right", feat}}, v);
  int open = 0;
  for (const auto& it : stream) {
    if (!it.is_token()) continue;
    const auto& tok = v.token(it.token_id);
    if (tok.find("_start|>") != std::string::npos) {
      CHECK(open == 0);
      ++open;
    } else {
      CHECK(open == 1);
      --open;
    }
  }
  CHECK(open == 0);
}

TEST_CASE("scene caption relation from coordinates") {
  const auto& v = default_vocabulary();
  Scene s;
  s.objects.push_back({"cube", "red", 0.1, 0.2, 0.0});
  s.objects.push_back({"bowl", "blue", 0.4, 0.2, 0.0});
  bool saw_left = false;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    auto cap = generate_scene_caption(s, seed, v);
    auto pred = parse_caption(cap.text);
    REQUIRE(pred.has_value());
    CHECK(pred->evaluate(s));
    if (cap.text == "the red cube is left of the blue bowl") saw_left = true;
  }
  CHECK(saw_left);
}

TEST_CASE("single object caption has no relation clause") {
  const auto& v = default_vocabulary();
  Scene s;
  s.objects.push_back({"ball", "green", 0.5, 0.5, 0.0});
  auto cap = generate_scene_caption(s, 1, v);
  auto pred = parse_caption(cap.text);
  REQUIRE(pred.has_value());
  CHECK_FALSE(pred->has_relation);
  CHECK(pred->evaluate(s));
  CHECK(detokenize(cap.token_ids, v) == cap.text);

  Scene empty;
  CHECK_THROWS_AS(generate_scene_caption(empty, 1, v), Error);
}

TEST_CASE("caption soundness over 1000 random scenes") {
  const auto& v = default_vocabulary();
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    Scene s;
    int n = 1 + static_cast<int>(rng.uniform_index(3));
    for (int i = 0; i < n; ++i) {
      SceneObject o;
      o.name = object_names()[rng.uniform_index(object_names().size())];
      o.color = color_names()[i];  // distinct colors keep mentions unambiguous
      o.x = rng.uniform(0.0, 1.0);
      o.y = rng.uniform(0.0, 1.0);
      s.objects.push_back(o);
    }
    // unique (color,name) pairs required for predicate lookup
    bool dup = false;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (s.objects[i].name == s.objects[j].name && s.objects[i].color == s.objects[j].color)
          dup = true;
    if (dup) continue;
    auto cap = generate_scene_caption(s, rng.next_u64(), v);
    auto pred = parse_caption(cap.text);
    REQUIRE(pred.has_value());
    CHECK(pred->evaluate(s));
  }
}

TEST_CASE("grammar closure: every generated token is in vocabulary") {
  const auto& v = default_vocabulary();
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    TemplateFamily f = action_families()[rng.uniform_index(action_families().size())];
    std::map<std::string, std::string> slots = {
        {"obj", object_names()[rng.uniform_index(object_names().size())]},
        {"obj_color", color_names()[rng.uniform_index(color_names().size())]},
        {"dst", container_names()[rng.uniform_index(container_names().size())]},
        {"dir", direction_names()[rng.uniform_index(direction_names().size())]},
        {"target", view_target_names()[rng.uniform_index(view_target_names().size())]},
        {"obj_a", "cube"},
        {"obj_b", "ball"}};
    auto ins = compose_instruction(f, slots, rng.next_u64(), v, ProductionSet::all);
    CHECK(ins.token_ids.size() >= 2);  // tokenize throws on any oov word
  }
}

TEST_CASE("prompt text tokenizes with the default vocabulary") {
  const auto& v = default_vocabulary();
  auto ins = compose_instruction(TemplateFamily::pick_place,
                                 {{"obj", "cube"}, {"obj_color", "red"}, {"dst", "bowl"}}, 11, v);
  auto prompt = render_embodiment_prompt(embodiment("point-gripper"), ins.prompt_form(), 16);
  auto ids = tokenize(prompt, v);
  CHECK(detokenize(ids, v) == prompt);
}
