#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowact/core/chunk.hpp"
#include "flowact/core/normalizer.hpp"
#include "flowact/core/projection.hpp"
#include "flowact/core/prompt.hpp"
#include "flowact/rng.hpp"

using namespace flowact;

namespace {

// Brute-force mask oracle: fill a grid with two nested loops and count.
int naive_mask_popcount(int c, int H_task, int H, int K) {
  int n = 0;
  for (int h = 0; h < H; ++h)
    for (int k = 0; k < K; ++k)
      if (k < c && h < H_task) ++n;
  return n;
}

Episode random_episode(int T, int d, std::uint64_t seed) {
  Rng rng(seed);
  Episode ep;
  ep.embodiment_id = "point-gripper";
  ep.state_dim = d;
  ep.action_dim = d;
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < d; ++k) ep.states.push_back(static_cast<float>(rng.normal()));
  for (int t = 0; t < T - 1; ++t)
    for (int k = 0; k < d; ++k) ep.actions.push_back(static_cast<float>(rng.normal()));
  return ep;
}

}  // namespace

TEST_CASE("build_mask basic shapes") {
  auto m = build_mask(5, 8, 16, 32);
  CHECK(m.popcount() == 40);
  for (int h = 8; h < 16; ++h)
    for (int k = 0; k < 32; ++k) CHECK_FALSE(m.at(h, k));

  auto full = build_mask(32, 16, 16, 32);
  CHECK(full.popcount() == 16 * 32);

  auto m2 = build_mask(7, 16, 16, 32);
  CHECK(m2.popcount() == naive_mask_popcount(7, 16, 16, 32));
  CHECK(m2.popcount() == 112);
}

TEST_CASE("build_mask rectangularity over random sizes") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    int c = 1 + static_cast<int>(rng.uniform_index(32));
    int ht = 1 + static_cast<int>(rng.uniform_index(16));
    auto m = build_mask(c, ht, 16, 32);
    for (int h = 0; h < 16; ++h)
      for (int k = 0; k < 32; ++k)
        CHECK(m.at(h, k) == (k < c && h < ht));
  }
}

TEST_CASE("build_mask rejects out-of-range arguments") {
  CHECK_THROWS_AS(build_mask(0, 8, 16, 32), Error);
  CHECK_THROWS_AS(build_mask(33, 8, 16, 32), Error);
  CHECK_THROWS_AS(build_mask(5, 0, 16, 32), Error);
  CHECK_THROWS_AS(build_mask(5, 17, 16, 32), Error);
}

TEST_CASE("fit_normalizer percentiles match sorted-array oracle") {
  std::vector<std::vector<double>> data;
  for (int i = 0; i < 100; ++i) data.push_back({static_cast<double>(i)});
  auto stats = fit_normalizer(data, "ramp");
  CHECK(stats.dims[0].q01 == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(stats.dims[0].q99 == doctest::Approx(98.01).epsilon(1e-12));
  CHECK_FALSE(stats.dims[0].constant);
}

TEST_CASE("fit_normalizer constant dimension flag") {
  std::vector<std::vector<double>> data(200, std::vector<double>{3.5});
  auto stats = fit_normalizer(data, "const");
  CHECK(stats.dims[0].constant);
  auto n = normalize_actions({3.5}, stats);
  CHECK(n[0] == 0.0);
  auto d = denormalize_actions(n, stats);
  CHECK(d[0] == 3.5);
}

TEST_CASE("fit_normalizer per-dim independence") {
  Rng rng(3);
  std::vector<std::vector<double>> both;
  std::vector<std::vector<double>> first, second;
  for (int i = 0; i < 500; ++i) {
    double a = rng.normal(0.0, 2.0);
    double b = rng.uniform(-5.0, 9.0);
    both.push_back({a, b});
    first.push_back({a});
    second.push_back({b});
  }
  auto s2 = fit_normalizer(both, "xy");
  auto sa = fit_normalizer(first, "x");
  auto sb = fit_normalizer(second, "y");
  CHECK(s2.dims[0].q01 == sa.dims[0].q01);
  CHECK(s2.dims[0].q99 == sa.dims[0].q99);
  CHECK(s2.dims[1].q01 == sb.dims[0].q01);
  CHECK(s2.dims[1].q99 == sb.dims[0].q99);
}

TEST_CASE("fit_normalizer errors and low-sample fallback") {
  CHECK_THROWS_AS(fit_normalizer({}, "empty"), Error);
  std::vector<std::vector<double>> bad(150, std::vector<double>{1.0});
  bad[7][0] = std::nan("");
  CHECK_THROWS_AS(fit_normalizer(bad, "nan"), Error);

  std::vector<std::vector<double>> few;
  for (int i = 0; i < 20; ++i) few.push_back({static_cast<double>(i)});
  auto s = fit_normalizer(few, "few");
  CHECK(s.low_sample);
  CHECK(s.dims[0].q01 == 0.0);
  CHECK(s.dims[0].q99 == 19.0);
}

TEST_CASE("normalize endpoints, midpoint, clipping, round trip") {
  NormalizerStats stats;
  stats.dataset_id = "t";
  stats.dims = {{-2.0, 6.0, false}};
  CHECK(normalize_actions({-2.0}, stats)[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(normalize_actions({6.0}, stats)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(normalize_actions({2.0}, stats)[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normalize_actions({16.0}, stats)[0] == 1.0);
  CHECK(normalize_actions({-100.0}, stats)[0] == -1.0);

  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    double a = rng.uniform(-1.999, 5.999);
    auto rt = denormalize_actions(normalize_actions({a}, stats), stats);
    CHECK(std::abs(rt[0] - a) <= 1e-12);
  }
  CHECK_THROWS_AS(normalize_actions({1.0, 2.0}, stats), Error);
}

TEST_CASE("normalization is order preserving inside the open interval") {
  NormalizerStats stats;
  stats.dims = {{0.0, 1.0, false}};
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    double a = rng.uniform(0.001, 0.999);
    double b = rng.uniform(0.001, 0.999);
    if (a == b) continue;
    auto na = normalize_actions({a}, stats)[0];
    auto nb = normalize_actions({b}, stats)[0];
    CHECK(((a < b) == (na < nb)));
  }
}

TEST_CASE("normalizer table text round trip") {
  std::vector<std::vector<double>> data;
  Rng rng(9);
  for (int i = 0; i < 300; ++i) data.push_back({rng.normal(), rng.uniform(0, 1), 4.0});
  NormalizerTable t;
  t.put(fit_normalizer(data, "demo"));
  auto t2 = NormalizerTable::from_text(t.to_text());
  const auto& a = t.get("demo");
  const auto& b = t2.get("demo");
  REQUIRE(a.dim() == b.dim());
  for (int k = 0; k < a.dim(); ++k) {
    CHECK(a.dims[k].q01 == b.dims[k].q01);  // 17 digits: exact
    CHECK(a.dims[k].q99 == b.dims[k].q99);
    CHECK(a.dims[k].constant == b.dims[k].constant);
  }
}

TEST_CASE("chunk_episode full and truncated") {
  auto ep = random_episode(101, 5, 1);
  auto full = chunk_episode(ep, 0, 16, 32, 16);
  CHECK(full.H_task == 16);
  CHECK(full.mask.popcount() == 16 * 5);

  auto ep2 = random_episode(11, 5, 2);  // 10 actions
  auto trunc = chunk_episode(ep2, 5, 16, 32, 16);
  CHECK(trunc.H_task == 5);
  CHECK(trunc.mask.popcount() == 5 * 5);
  CHECK(trunc.zero_outside_mask());

  CHECK_THROWS_AS(chunk_episode(ep2, 10, 16, 32, 16), Error);
}

TEST_CASE("chunk_episode matches direct-copy oracle") {
  auto ep = random_episode(60, 4, 3);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    int t = static_cast<int>(rng.uniform_index(59));
    auto ch = chunk_episode(ep, t, 16, 32, 16);
    for (int h = 0; h < ch.H_task; ++h)
      for (int k = 0; k < 4; ++k)
        CHECK(ch.values.at(h, k) == static_cast<double>(ep.action_row(t + h)[k]));
  }
}

TEST_CASE("embodiment prompt template") {
  EmbodimentSpec spec{"toy-gripper", Arms::single, false, false, ControlMode::delta_eef, 5, 10.0, 16};
  auto p = render_embodiment_prompt(spec, "pick up the red cube", 16);
  CHECK(p ==
        "The robot is toy-gripper with single arm. The control frequency is 10 Hz. "
        "Please predict the next 16 control actions to execute the following task: "
        "pick up the red cube.");

  EmbodimentSpec dual{"biarm", Arms::dual, true, true, ControlMode::abs_joint, 14, 30.0, 16};
  auto q = render_embodiment_prompt(dual, "fold the towel", 8);
  CHECK(q.find("with dual arms, waist, and mobile base.") != std::string::npos);

  CHECK(render_embodiment_prompt(spec, "pick up the red cube", 16) == p);
  CHECK_THROWS_AS(render_embodiment_prompt(spec, "", 16), Error);
}

TEST_CASE("prompt differs when any interpolated field differs") {
  EmbodimentSpec a{"r1", Arms::single, false, false, ControlMode::delta_eef, 5, 10.0, 16};
  EmbodimentSpec b = a;
  b.robot_tag = "r2";
  EmbodimentSpec c = a;
  c.control_hz = 20.0;
  auto base = render_embodiment_prompt(a, "task one", 16);
  CHECK(render_embodiment_prompt(b, "task one", 16) != base);
  CHECK(render_embodiment_prompt(c, "task one", 16) != base);
  CHECK(render_embodiment_prompt(a, "task two", 16) != base);
  CHECK(render_embodiment_prompt(a, "task one", 8) != base);
}

TEST_CASE("projection parameter counts match closed forms") {
  ProjectionConfig cfg;
  cfg.hidden = 128;
  cfg.dims = {{"a", 5}, {"b", 8}};

  Rng rng(1);
  cfg.kind = ProjectionKind::multi_mlp;
  CHECK(cfg.param_count() == 2 * 128 * 13);
  CHECK(ProjectionMaps::init(cfg, rng).count_weights() == 3328);

  cfg.kind = ProjectionKind::concat;
  CHECK(cfg.param_count() == 2 * 128 * 13);
  CHECK(ProjectionMaps::init(cfg, rng).count_weights() == 3328);

  cfg.kind = ProjectionKind::zero_pad;
  CHECK(cfg.param_count() == 2 * 128 * 8);
  CHECK(ProjectionMaps::init(cfg, rng).count_weights() == 2048);
}

TEST_CASE("zero-pad encode equals shared map on a right-padded vector") {
  ProjectionConfig cfg;
  cfg.kind = ProjectionKind::zero_pad;
  cfg.hidden = 16;
  cfg.dims = {{"a", 5}, {"b", 8}};
  Rng rng(2);
  auto maps = ProjectionMaps::init(cfg, rng);

  std::vector<double> a = {1.0, -2.0, 0.5, 3.0, -1.5};
  auto z = maps.encode(a, "a");
  // manual: pad to d_max=8 with zeros, multiply by the shared matrix
  std::vector<double> padded = {1.0, -2.0, 0.5, 3.0, -1.5, 0.0, 0.0, 0.0};
  std::vector<double> want(16, 0.0);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 16; ++j) want[j] += padded[i] * maps.enc[0].at(i, j);
  for (int j = 0; j < 16; ++j) CHECK(z[j] == doctest::Approx(want[j]).epsilon(1e-15));
}

TEST_CASE("concat encode uses the embodiment's dedicated segment") {
  ProjectionConfig cfg;
  cfg.kind = ProjectionKind::concat;
  cfg.hidden = 8;
  cfg.dims = {{"a", 5}, {"b", 8}};
  CHECK(cfg.segment_offset("a") == 0);
  CHECK(cfg.segment_offset("b") == 5);

  Rng rng(6);
  auto maps = ProjectionMaps::init(cfg, rng);
  std::vector<double> b(8);
  for (int i = 0; i < 8; ++i) b[i] = i + 1.0;
  auto z = maps.encode(b, "b");
  // equivalent: 13-dim concat vector with b in dims 5..12
  std::vector<double> cat(13, 0.0);
  for (int i = 0; i < 8; ++i) cat[5 + i] = b[i];
  std::vector<double> want(8, 0.0);
  for (int i = 0; i < 13; ++i)
    for (int j = 0; j < 8; ++j) want[j] += cat[i] * maps.enc[0].at(i, j);
  for (int j = 0; j < 8; ++j) CHECK(z[j] == doctest::Approx(want[j]).epsilon(1e-15));

  CHECK_THROWS_AS(maps.encode(b, "nope"), Error);
}

TEST_CASE("toy embodiment registry invariants") {
  for (const auto& e : toy_embodiments()) {
    CHECK(e.native_dim <= kChannelCap);
    CHECK(e.default_horizon <= kHorizon);
    if (e.control_mode == ControlMode::waypoint) CHECK(e.native_dim == 3);
  }
  CHECK(embodiment("planar-navigator").default_horizon == 8);
  CHECK_THROWS_AS(embodiment("unknown-bot"), Error);
}
