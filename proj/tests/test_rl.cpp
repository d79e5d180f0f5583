#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flowact/datagen/corpus.hpp"
#include "flowact/rl/ppo.hpp"

using namespace flowact;

namespace {

// Independent GAE oracle: advantage as the explicit discounted sum of TD
// residuals within each episode segment.
void gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                const std::vector<bool>& done, double gamma, double lambda,
                std::vector<double>& adv) {
  const int n = static_cast<int>(r.size());
  adv.assign(n, 0.0);
  for (int t = 0; t < n; ++t) {
    double acc = 0.0, w = 1.0;
    for (int l = t; l < n; ++l) {
      double not_done = done[l] ? 0.0 : 1.0;
      double v_next = (l + 1 < n) ? v[l + 1] : 0.0;
      double delta = r[l] + gamma * v_next * not_done - v[l];
      acc += w * delta;
      if (done[l]) break;
      w *= gamma * lambda * not_done;
    }
    adv[t] = acc;
  }
}

PolicyConfig rl_policy(const Vocabulary& vocab) {
  PolicyConfig cfg;
  cfg.hidden = 32;
  cfg.cond_blocks = 1;
  cfg.dit_blocks = 1;
  cfg.heads = 2;
  cfg.time_embed_dim = 16;
  cfg.vocab_size = vocab.size();
  for (const auto& e : toy_embodiments()) cfg.proj_dims.push_back({e.robot_tag, e.native_dim});
  return cfg;
}

struct RlFixture {
  const Vocabulary& vocab = default_vocabulary();
  Corpus corpus;
  PolicyModel model;
  NormalizerStats stats;
  EnvSpec spec;

  RlFixture() : model(PolicyModel::init(rl_policy(default_vocabulary()), 3, InitMode::randomized)) {
    CorpusSpec cs;
    cs.episodes_per_combo = 3;
    cs.embodiments = {"point-gripper"};
    cs.seed = 5;
    corpus = generate_corpus(cs, vocab);
    stats = corpus.normalizers.get("syn/point-gripper");
    spec.spec_id = "rl";
    spec.family = TemplateFamily::pick_place;
    spec.embodiment_id = "point-gripper";
    spec.max_steps = 96;  // keep unit-test rollouts short
  }

  std::vector<ToyEnv> pool(int n) {
    std::vector<ToyEnv> envs;
    for (int i = 0; i < n; ++i) envs.emplace_back(spec, stats, vocab);
    return envs;
  }
};

}  // namespace

TEST_CASE("gae: single transition and zero cases") {
  std::vector<double> adv, ret;
  compute_gae({1.0}, {0.0}, {true}, 0.99, 0.95, adv, ret);
  CHECK(adv[0] == 1.0);
  CHECK(ret[0] == 1.0);

  compute_gae({0, 0, 0}, {0, 0, 0}, {false, false, true}, 0.99, 0.95, adv, ret);
  for (double a : adv) CHECK(a == 0.0);

  CHECK_THROWS_AS(compute_gae({1.0}, {0.0, 0.0}, {true}, 0.99, 0.95, adv, ret), Error);
}

TEST_CASE("gae matches the brute-force recursion oracle") {
  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + static_cast<int>(rng.uniform_index(20));
    std::vector<double> r(n), v(n);
    std::vector<bool> done(n, false);
    for (int i = 0; i < n; ++i) {
      r[i] = rng.normal();
      v[i] = rng.normal();
      if (rng.uniform() < 0.15) done[i] = true;
    }
    done[n - 1] = rng.uniform() < 0.7;
    std::vector<double> adv, ret, oracle;
    compute_gae(r, v, done, 0.99, 0.95, adv, ret);
    gae_oracle(r, v, done, 0.99, 0.95, oracle);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(adv[i] - oracle[i]) < 1e-10);
      CHECK(ret[i] == adv[i] + v[i]);
    }
  }
}

TEST_CASE("value head: bias at zero weights, permutation invariance, oracle") {
  ValueHead head = ValueHead::init(8);
  head.b = 0.75;
  Rng rng(4);
  Tensor feats = Tensor::randn(5, 8, rng);
  CHECK(head.forward(feats) == 0.75);

  head.w = Tensor::randn(1, 8, rng);
  double v1 = head.forward(feats);
  Tensor swapped = feats;
  for (int j = 0; j < 8; ++j) std::swap(swapped.at(0, j), swapped.at(3, j));
  CHECK(head.forward(swapped) == doctest::Approx(v1).epsilon(1e-12));

  double want = head.b;
  for (int j = 0; j < 8; ++j) {
    double mean = 0;
    for (int i = 0; i < 5; ++i) mean += feats.at(i, j) / 5;
    want += head.w.at(0, j) * mean;
  }
  CHECK(v1 == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("ppo config arithmetic reproduces the published 8192-chunk count") {
  PPOConfig cfg;
  cfg.n_envs = 128;
  cfg.env_steps_per_epoch = 128;
  cfg.rollout_epochs = 8;
  CHECK(cfg.chunks_per_iteration() == 8192);

  PPOConfig bad = cfg;
  bad.rollout_temperature = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("rollout collection: counts, determinism, trace scoreability") {
  RlFixture fx;
  PPOConfig cfg;
  cfg.n_envs = 2;
  cfg.rollout_epochs = 2;
  cfg.env_steps_per_epoch = 32;  // 2 chunks per epoch per env
  cfg.sde_steps = 3;

  auto envs1 = fx.pool(cfg.n_envs);
  ValueHead head = ValueHead::init(fx.model.cfg.hidden);
  auto b1 = collect_rollouts(fx.model, head, envs1, cfg, fx.vocab, 77);
  CHECK(static_cast<long>(b1.transitions.size()) == cfg.chunks_per_iteration());
  for (const auto& t : b1.transitions) {
    CHECK(b1.traces[t.trace_ref].scoreable());
    CHECK((t.reward == 0.0 || t.reward == 1.0));
  }
  CHECK(b1.advantages.size() == b1.transitions.size());

  auto envs2 = fx.pool(cfg.n_envs);
  auto b2 = collect_rollouts(fx.model, head, envs2, cfg, fx.vocab, 77);
  REQUIRE(b1.transitions.size() == b2.transitions.size());
  for (std::size_t i = 0; i < b1.transitions.size(); ++i) {
    CHECK(b1.transitions[i].logprob == b2.transitions[i].logprob);
    CHECK(b1.transitions[i].value == b2.transitions[i].value);
    CHECK(b1.transitions[i].reward == b2.transitions[i].reward);
  }
}

TEST_CASE("ppo identities: unit ratio pre-update and stop-gradient boundary") {
  RlFixture fx;
  PPOConfig cfg;
  cfg.n_envs = 2;
  cfg.rollout_epochs = 1;
  cfg.env_steps_per_epoch = 32;
  cfg.sde_steps = 3;
  cfg.update_epochs = 1;
  cfg.minibatch_size = 4;

  auto envs = fx.pool(cfg.n_envs);
  ValueHead head = ValueHead::init(fx.model.cfg.hidden);
  auto batch = collect_rollouts(fx.model, head, envs, cfg, fx.vocab, 5);
  // a random policy rarely succeeds; give the value regression a target
  for (std::size_t i = 0; i < batch.returns.size(); i += 2) batch.returns[i] = 1.0;

  // value-only update: actor lr 0 leaves every model parameter bit-identical
  OptimizerConfig oc;
  oc.group_lr = {{"encoder", 0.0}, {"decoder", 0.0}};
  oc.total_steps = 0;
  Optimizer actor_opt(oc);
  ValueOptimizer value_opt(fx.model.cfg.hidden, 1e-3);

  std::vector<std::vector<double>> before;
  for (const auto& p : fx.model.store.items()) before.push_back(p.value.data);
  auto head_before = head.w.data;

  auto metrics = ppo_update(fx.model, head, actor_opt, value_opt, batch, cfg, fx.vocab, 9);
  CHECK(metrics.first_minibatch_max_ratio_err <= 1e-6);  // unchanged params, unit ratio

  for (std::size_t i = 0; i < fx.model.store.items().size(); ++i)
    CHECK(fx.model.store.items()[i].value.data == before[i]);
  CHECK(head.w.data != head_before);  // the head itself trains
}

TEST_CASE("actor update moves encoder and decoder but never the text head") {
  RlFixture fx;
  PPOConfig cfg;
  cfg.n_envs = 1;
  cfg.rollout_epochs = 1;
  cfg.env_steps_per_epoch = 32;
  cfg.sde_steps = 3;
  cfg.update_epochs = 1;
  cfg.minibatch_size = 2;
  cfg.actor_lr = 1e-3;

  auto envs = fx.pool(cfg.n_envs);
  ValueHead head = ValueHead::init(fx.model.cfg.hidden);
  auto batch = collect_rollouts(fx.model, head, envs, cfg, fx.vocab, 6);
  // make at least one advantage informative
  bool any_nonzero = false;
  for (double a : batch.advantages) any_nonzero = any_nonzero || a != 0.0;
  if (!any_nonzero) batch.advantages[0] = 1.0;

  OptimizerConfig oc;
  oc.group_lr = {{"encoder", cfg.actor_lr}, {"decoder", cfg.actor_lr}};
  oc.total_steps = 0;
  oc.weight_decay = 0.0;
  Optimizer actor_opt(oc);
  ValueOptimizer value_opt(fx.model.cfg.hidden, cfg.value_lr);

  auto head_w_before = fx.model.store.at("head.w").value.data;
  auto dec_before = fx.model.store.at("dit.b0.attn.wq").value.data;
  auto enc_before = fx.model.store.at("cond.b0.attn.wq").value.data;
  ppo_update(fx.model, head, actor_opt, value_opt, batch, cfg, fx.vocab, 10);
  CHECK(fx.model.store.at("head.w").value.data == head_w_before);
  CHECK(fx.model.store.at("dit.b0.attn.wq").value.data != dec_before);
  CHECK(fx.model.store.at("cond.b0.attn.wq").value.data != enc_before);
}

TEST_CASE("logprob recomputation under unchanged parameters is exact across the batch") {
  RlFixture fx;
  PPOConfig cfg;
  cfg.n_envs = 1;
  cfg.rollout_epochs = 1;
  cfg.env_steps_per_epoch = 32;
  cfg.sde_steps = 4;

  auto envs = fx.pool(1);
  ValueHead head = ValueHead::init(fx.model.cfg.hidden);
  auto batch = collect_rollouts(fx.model, head, envs, cfg, fx.vocab, 11);
  for (const auto& tr : batch.transitions) {
    double lp = chunk_logprob_value(fx.model, batch.traces[tr.trace_ref],
                                    batch.conds[tr.trace_ref], fx.vocab,
                                    batch.masks[tr.trace_ref]);
    CHECK(std::abs(lp - tr.logprob) < 1e-9);
    CHECK(std::abs(std::exp(lp - tr.logprob) - 1.0) < 1e-6);
  }
}
