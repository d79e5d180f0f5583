#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "flowact/datagen/corpus.hpp"
#include "flowact/train/stages.hpp"

using namespace flowact;

namespace {

PolicyConfig small_policy(const Vocabulary& vocab) {
  PolicyConfig cfg;
  cfg.hidden = 32;
  cfg.cond_blocks = 1;
  cfg.dit_blocks = 1;
  cfg.heads = 2;
  cfg.time_embed_dim = 16;
  cfg.vocab_size = vocab.size();
  cfg.obs_dim = 24;
  for (const auto& e : toy_embodiments()) cfg.proj_dims.push_back({e.robot_tag, e.native_dim});
  return cfg;
}

const Corpus& shared_corpus() {
  static Corpus corpus = [] {
    CorpusSpec cs;
    cs.episodes_per_combo = 4;
    cs.seed = 21;
    return generate_corpus(cs, default_vocabulary());
  }();
  return corpus;
}

}  // namespace

TEST_CASE("batch mixer allocation follows the weights") {
  BatchMixer all_one({{"a", 10, 1.0}, {"b", 10, 0.0}}, 1);
  for (int i = 0; i < 20; ++i)
    for (auto p : all_one.next_batch(8)) CHECK(p.source == 0);

  BatchMixer half({{"a", 10, 0.5}, {"b", 10, 0.5}}, 2);
  for (int i = 0; i < 50; ++i) {
    auto picks = half.next_batch(8);
    int a = 0;
    for (auto p : picks) a += p.source == 0 ? 1 : 0;
    CHECK(a == 4);  // exact divisibility: 4/4 split every batch
  }

  BatchMixer skew({{"a", 100, 0.742}, {"b", 100, 0.258}}, 3);
  long a = 0, total = 0;
  for (int i = 0; i < 1250; ++i)
    for (auto p : skew.next_batch(8)) {
      a += p.source == 0 ? 1 : 0;
      ++total;
    }
  CHECK(std::abs(static_cast<double>(a) / total - 0.742) < 0.01);

  CHECK_THROWS_AS(BatchMixer({{"a", 0, 0.5}, {"b", 10, 0.5}}, 4), Error);
}

TEST_CASE("optimizer: clipping, cosine endpoint, freeze map") {
  OptimizerConfig oc;
  oc.grad_clip = 1.0;
  oc.group_lr = {{"encoder", 0.1}, {"decoder", 0.1}, {"text-head", 0.1}};
  oc.total_steps = 100;
  Optimizer opt(oc);

  CHECK(opt.lr_at("decoder", 0) == doctest::Approx(0.1));
  CHECK(opt.lr_at("decoder", 100) == doctest::Approx(0.0));  // cosine floor
  CHECK(opt.lr_at("decoder", 50) == doctest::Approx(0.05));

  const auto& vocab = default_vocabulary();
  auto model = PolicyModel::init(small_policy(vocab), 1, InitMode::randomized);
  auto frozen_snapshot = model.store.at("embed.tok").value.data;

  // gradient with global norm 2x the clip bound is scaled by 0.5
  GradMap grads;
  Tensor g = Tensor::zeros(model.store.at("head.b").value.rows,
                           model.store.at("head.b").value.cols);
  g.at(0, 0) = 2.0;  // global norm 2
  grads.emplace("head.b", g);
  opt.step(model, grads, {"encoder"});
  // after clipping the Adam first moment sees g = 1.0
  CHECK(opt.moments1().at("head.b").at(0, 0) == doctest::Approx(0.1 * 1.0).epsilon(1e-6));
  CHECK(model.store.at("embed.tok").value.data == frozen_snapshot);  // frozen group untouched

  // non-finite gradients skip the step
  GradMap bad;
  Tensor gb = g;
  gb.at(0, 1) = std::nan("");
  bad.emplace("head.b", gb);
  auto before = model.store.at("head.b").value.data;
  opt.step(model, bad, {});
  CHECK(opt.skipped() == 1);
  CHECK(model.store.at("head.b").value.data == before);
}

TEST_CASE("objective linearity: L = lambda_act L_act + lambda_vl L_vl exactly") {
  const auto& vocab = default_vocabulary();
  auto model = PolicyModel::init(small_policy(vocab), 3, InitMode::randomized);
  const auto& corpus = shared_corpus();
  TrainDataOptions opts;
  TrainData data(corpus, vocab, opts);

  auto a = data.make_action_sample(0, 0, 5);
  auto v = data.make_vl_sample(0, 6);
  Rng rng(7);
  double tau = 0.37;
  Tensor y1 = Tensor::randn(model.cfg.horizon, model.cfg.channel_cap, rng);
  Tensor ytau = interpolate(a.y0, y1, tau);

  Tape t;
  Var cf = encode_condition(t, model, a.cond, vocab, false);
  Var la = flow_loss(t, velocity_forward(t, model, t.constant(ytau), tau, cf,
                                         a.cond.embodiment_id, false),
                     a.y0, y1, a.mask);
  Var lv = vl_next_token_loss(t, model, v.caption_ids, v.obs, vocab, false);
  double la_v = t.val(la).at(0, 0), lv_v = t.val(lv).at(0, 0);
  Var joint = t.add(t.scale(la, 0.7), t.scale(lv, 0.3));
  CHECK(t.val(joint).at(0, 0) == 0.7 * la_v + 0.3 * lv_v);
  Var act_only = t.add(t.scale(la, 1.0), t.scale(lv, 0.0));
  CHECK(t.val(act_only).at(0, 0) == la_v);
}

TEST_CASE("stage defaults carry the published shapes") {
  auto t2a = StageConfig::defaults(Stage::t2a);
  CHECK(t2a.steps == 2000);
  CHECK(t2a.timestep.kind == TimestepDist::Kind::sigmoid_normal);
  CHECK(t2a.frozen.count("encoder") == 1);

  auto sft = StageConfig::defaults(Stage::sft);
  CHECK(sft.lambda_act == 1.0);
  CHECK(sft.lambda_vl == 0.1);
  CHECK(sft.timestep.kind == TimestepDist::Kind::beta);
}

TEST_CASE("navigation samples carry H_task=8 masks inside H=16 chunks") {
  const auto& vocab = default_vocabulary();
  const auto& corpus = shared_corpus();
  TrainDataOptions opts;
  TrainData data(corpus, vocab, opts);
  int nav_source = -1;
  for (int i = 0; i < data.action_source_count(); ++i)
    if (data.action_source_name(i).find("navigator") != std::string::npos) nav_source = i;
  REQUIRE(nav_source >= 0);
  auto s = data.make_action_sample(nav_source, 0, 3);
  CHECK(s.mask.H == 16);
  CHECK(s.mask.H_task <= 8);
  CHECK(s.mask.c == 3);
  CHECK(s.mask.popcount() == s.mask.H_task * 3);
}

TEST_CASE("t2a freezes encoder and text head bit-exactly and learns") {
  const auto& vocab = default_vocabulary();
  auto model = PolicyModel::init(small_policy(vocab), 5, InitMode::standard);
  const auto& corpus = shared_corpus();

  TrainDataOptions opts;
  opts.with_obs = false;
  opts.full_sequence = true;
  TrainData data(corpus, vocab, opts);

  auto cfg = StageConfig::defaults(Stage::t2a);
  cfg.steps = 40;
  cfg.batch_size = 4;
  cfg.seed = 11;
  cfg.lr = {{"encoder", 3e-3}, {"decoder", 3e-3}, {"text-head", 3e-3}};

  std::map<std::string, std::vector<double>> before;
  for (const auto& p : model.store.items())
    if (p.group != ParamGroup::decoder) before[p.name] = p.value.data;

  double loss0 = probe_action_loss(model, data, vocab, cfg.timestep, 16, 99);
  auto opt = make_optimizer(cfg);
  run_t2a(model, opt, cfg, data, vocab);
  double loss1 = probe_action_loss(model, data, vocab, cfg.timestep, 16, 99);

  for (const auto& p : model.store.items())
    if (p.group != ParamGroup::decoder) CHECK(p.value.data == before[p.name]);
  CHECK(loss1 < loss0);
}

TEST_CASE("t2a rejects observation slots") {
  const auto& vocab = default_vocabulary();
  auto model = PolicyModel::init(small_policy(vocab), 6, InitMode::standard);
  const auto& corpus = shared_corpus();

  TrainDataOptions opts;
  opts.with_obs = true;  // violates the vision-free contract
  TrainData data(corpus, vocab, opts);
  auto cfg = StageConfig::defaults(Stage::t2a);
  cfg.steps = 1;
  auto opt = make_optimizer(cfg);
  CHECK_THROWS_AS(run_t2a(model, opt, cfg, data, vocab), Error);

  // a corpus with recorded view tracks is rejected as well
  Corpus viewy;
  viewy.episodes.push_back(corpus.episodes[0]);
  ViewTrack v;
  v.name = "ego";
  v.dim = 2;
  v.data = {1.0f, 2.0f};
  viewy.episodes[0].views.push_back(v);
  viewy.normalizers = corpus.normalizers;
  TrainDataOptions blind;
  blind.with_obs = false;
  TrainData data2(viewy, vocab, blind);
  CHECK_THROWS_AS(run_t2a(model, opt, cfg, data2, vocab), Error);
}

TEST_CASE("cpt updates both encoder and decoder groups") {
  const auto& vocab = default_vocabulary();
  auto model = PolicyModel::init(small_policy(vocab), 7, InitMode::standard);
  const auto& corpus = shared_corpus();
  TrainDataOptions opts;
  TrainData data(corpus, vocab, opts);

  auto cfg = StageConfig::defaults(Stage::cpt);
  cfg.steps = 3;
  cfg.batch_size = 6;
  cfg.seed = 2;
  cfg.lr = {{"encoder", 1e-3}, {"decoder", 1e-3}, {"text-head", 1e-3}};

  auto enc_before = model.store.at("cond.b0.attn.wq").value.data;
  auto dec_before = model.store.at("dit.b0.attn.wq").value.data;
  auto opt = make_optimizer(cfg);
  run_cpt(model, opt, cfg, data, vocab);
  CHECK(model.store.at("cond.b0.attn.wq").value.data != enc_before);
  CHECK(model.store.at("dit.b0.attn.wq").value.data != dec_before);
}

TEST_CASE("vl co-training reduces held-out caption loss") {
  const auto& vocab = default_vocabulary();
  auto model = PolicyModel::init(small_policy(vocab), 8, InitMode::standard);
  const auto& corpus = shared_corpus();
  TrainDataOptions opts;
  TrainData data(corpus, vocab, opts);

  auto cfg = StageConfig::defaults(Stage::cpt);
  cfg.steps = 60;
  cfg.batch_size = 4;
  cfg.vl_weight = 0.5;
  cfg.lambda_vl = 1.0;
  cfg.seed = 3;
  cfg.lr = {{"encoder", 3e-3}, {"decoder", 3e-3}, {"text-head", 3e-3}};

  double before = probe_vl_loss(model, data, vocab, 16, 42);
  auto opt = make_optimizer(cfg);
  run_cpt(model, opt, cfg, data, vocab);
  double after = probe_vl_loss(model, data, vocab, 16, 42);
  CHECK(after < before);
}

TEST_CASE("checkpoint save/load round trip and resume bit-exactness") {
  const auto& vocab = default_vocabulary();
  auto dir = std::filesystem::temp_directory_path() / "flowact_ckpt";
  std::filesystem::create_directories(dir);
  const auto& corpus = shared_corpus();
  TrainDataOptions opts;
  TrainData data(corpus, vocab, opts);

  auto cfg = StageConfig::defaults(Stage::sft);
  cfg.steps = 8;
  cfg.batch_size = 4;
  cfg.seed = 13;
  cfg.lr = {{"encoder", 1e-3}, {"decoder", 1e-3}, {"text-head", 1e-3}};

  // run A: 8 uninterrupted steps
  auto model_a = PolicyModel::init(small_policy(vocab), 9, InitMode::standard);
  auto opt_a = make_optimizer(cfg);
  run_sft(model_a, opt_a, cfg, data, vocab);

  // run B: 4 steps, checkpoint, reload, resume to 8
  auto model_b = PolicyModel::init(small_policy(vocab), 9, InitMode::standard);
  auto opt_b = make_optimizer(cfg);
  StageConfig half = cfg;
  half.steps = 4;
  run_sft(model_b, opt_b, half, data, vocab);

  Checkpoint ck;
  ck.model = model_b;
  ck.vocab = vocab;
  ck.normalizers = corpus.normalizers;
  ck.stage = "sft";
  ck.step = 4;
  ck.master_seed = cfg.seed;
  ck.opt_m1 = opt_b.moments1();
  ck.opt_m2 = opt_b.moments2();
  std::string path = (dir / "resume.ckpt").string();
  save_checkpoint(ck, path);

  auto policy_json = policy_config_to_json(model_b.cfg);
  auto loaded = load_checkpoint(path, &policy_json);
  CHECK(loaded.step == 4);
  for (std::size_t i = 0; i < loaded.model.store.items().size(); ++i)
    CHECK(loaded.model.store.items()[i].value.data == model_b.store.items()[i].value.data);

  auto opt_c = make_optimizer(cfg);
  opt_c.restore_moments(loaded.opt_m1, loaded.opt_m2);
  run_sft(loaded.model, opt_c, cfg, data, vocab, {}, /*start_step=*/4);

  for (std::size_t i = 0; i < loaded.model.store.items().size(); ++i)
    CHECK(loaded.model.store.items()[i].value.data == model_a.store.items()[i].value.data);

  // architecture mismatch must be refused
  PolicyConfig other = small_policy(vocab);
  other.hidden = 64;
  auto other_json = policy_config_to_json(other);
  CHECK_THROWS_AS(load_checkpoint(path, &other_json), Error);
  CHECK_NOTHROW(load_checkpoint(path, &other_json, /*force=*/true));
}

TEST_CASE("identical seeds give bit-identical training runs") {
  const auto& vocab = default_vocabulary();
  const auto& corpus = shared_corpus();
  TrainDataOptions opts;
  TrainData data(corpus, vocab, opts);
  auto cfg = StageConfig::defaults(Stage::sft);
  cfg.steps = 6;
  cfg.batch_size = 4;
  cfg.seed = 17;

  auto m1 = PolicyModel::init(small_policy(vocab), 10, InitMode::standard);
  auto m2 = PolicyModel::init(small_policy(vocab), 10, InitMode::standard);
  auto o1 = make_optimizer(cfg);
  auto o2 = make_optimizer(cfg);
  run_sft(m1, o1, cfg, data, vocab);
  run_sft(m2, o2, cfg, data, vocab);
  for (std::size_t i = 0; i < m1.store.items().size(); ++i)
    CHECK(m1.store.items()[i].value.data == m2.store.items()[i].value.data);
}

TEST_CASE("config canonicalization is idempotent") {
  nlohmann::json j;
  j["b"] = 1;
  j["a"] = {{"z", 2.5}, {"y", "text"}};
  auto once = canonical_config(j);
  auto twice = canonical_config(nlohmann::json::parse(once));
  CHECK(once == twice);
  CHECK(config_hash(j) == config_hash(nlohmann::json::parse(once)));
}
