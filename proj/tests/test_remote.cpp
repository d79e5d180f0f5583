#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "flowact/datagen/corpus.hpp"
#include "flowact/envs/client.hpp"
#include "flowact/envs/server.hpp"

using namespace flowact;

namespace {

struct Fixture {
  const Vocabulary& vocab = default_vocabulary();
  Corpus corpus;
  EnvSpec spec;
  std::map<std::string, EnvSpec> registry;
  std::map<std::string, NormalizerStats> stats;

  Fixture() {
    CorpusSpec cs;
    cs.episodes_per_combo = 3;
    cs.embodiments = {"point-gripper"};
    cs.seed = 77;
    corpus = generate_corpus(cs, vocab);
    spec.spec_id = "pick";
    spec.family = TemplateFamily::pick_place;
    spec.embodiment_id = "point-gripper";
    spec.feature_noise_std = 0.01;
    registry[spec.spec_id] = spec;
    stats[spec.spec_id] = corpus.normalizers.get("syn/point-gripper");
  }

  std::vector<ActionChunk> oracle_chunks(const TaskInstance& inst) {
    auto ep = plan_trajectory(inst, vocab);
    std::vector<ActionChunk> chunks;
    const auto& st = stats.at("pick");
    for (int t = 0; t < ep.num_actions();) {
      int take = std::min(kHorizon, ep.num_actions() - t);
      std::vector<std::vector<double>> rows;
      for (int h = 0; h < take; ++h) {
        const float* a = ep.action_row(t + h);
        rows.push_back(std::vector<double>(a, a + ep.action_dim));
      }
      chunks.push_back(normalize_chunk(rows, st, "point-gripper"));
      t += take;
    }
    return chunks;
  }
};

}  // namespace

TEST_CASE("local and remote envs are lockstep-identical under shared seeds") {
  Fixture fx;
  EnvServer server(fx.registry, fx.stats, fx.vocab);
  server.start(0);

  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    ToyEnv local(fx.spec, fx.stats.at("pick"), fx.vocab);
    auto [ls, lc] = local.reset(seed);

    RemoteEnv remote("127.0.0.1", server.port(), fx.vocab);
    auto [rs, rc] = remote.reset("pick", seed);

    CHECK(ls.state_row == rs.state_row);
    CHECK(lc.prompt_tokens == rc.prompt_tokens);
    REQUIRE(lc.obs[0].features.rows == rc.obs[0].features.rows);
    for (std::size_t i = 0; i < lc.obs[0].features.data.size(); ++i)
      CHECK(lc.obs[0].features.data[i] == rc.obs[0].features.data[i]);

    auto chunks = fx.oracle_chunks(local.task());
    for (const auto& ch : chunks) {
      auto lr = local.step(ch);
      auto rr = remote.step(ch);
      CHECK(lr.state.state_row == rr.state.state_row);
      CHECK(lr.reward == rr.reward);
      CHECK(lr.done == rr.done);
      if (!lr.done) {
        auto lcond = local.conditioning();
        auto rcond = remote.conditioning();
        CHECK(lcond.obs[0].features.data == rcond.obs[0].features.data);
      }
      if (lr.done) break;
    }
    remote.close_session();
  }
  server.stop();
}

TEST_CASE("protocol faults are typed errors, never silent transitions") {
  Fixture fx;
  EnvServer server(fx.registry, fx.stats, fx.vocab);
  server.start(0);

  RemoteEnv remote("127.0.0.1", server.port(), fx.vocab);
  auto [s, c] = remote.reset("pick", 3);

  // run the oracle to completion, then step a finished episode
  ToyEnv shadow(fx.spec, fx.stats.at("pick"), fx.vocab);
  shadow.reset(3);
  bool done = false;
  auto chunks = fx.oracle_chunks(shadow.task());
  for (const auto& ch : chunks) {
    auto r = remote.step(ch);
    if (r.done) {
      done = true;
      break;
    }
  }
  REQUIRE(done);
  try {
    remote.step(chunks.back());
    FAIL("expected protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::protocol_error);
  }

  // wrong action arity
  RemoteEnv r2("127.0.0.1", server.port(), fx.vocab);
  r2.reset("pick", 4);
  ActionChunk bad;
  bad.c = 3;
  bad.H_task = 2;
  bad.embodiment_id = "point-gripper";
  bad.mask = build_mask(3, 2);
  bad.values = Tensor::zeros(kHorizon, kChannelCap);
  try {
    r2.step(bad);
    FAIL("expected protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::protocol_error);
    CHECK(std::string(e.what()).find("native dim") != std::string::npos);
  }

  // unknown spec and unknown session
  RemoteEnv r3("127.0.0.1", server.port(), fx.vocab);
  CHECK_THROWS_AS(r3.reset("no-such-env", 1), Error);

  // malformed frame straight over a raw socket: server echoes a typed error
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(server.port()));
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  send_frame(fd, "this is not json");
  std::string reply;
  REQUIRE(recv_frame(fd, reply, 5000));
  auto j = nlohmann::json::parse(reply);
  CHECK(j.contains("error"));
  CHECK(j["error"]["kind"] == "protocol-error");
  CHECK(j["error"]["detail"].get<std::string>().find("not json") != std::string::npos);
  ::close(fd);

  server.stop();
}

TEST_CASE("concurrent sessions with distinct seeds do not cross-talk") {
  Fixture fx;
  EnvServer server(fx.registry, fx.stats, fx.vocab);
  server.start(0);

  const int kSessions = 24;
  std::vector<std::string> failures(kSessions);
  std::vector<std::thread> threads;
  for (int i = 0; i < kSessions; ++i) {
    threads.emplace_back([&, i] {
      try {
        std::uint64_t seed = 1000 + i;
        ToyEnv local(fx.spec, fx.stats.at("pick"), fx.vocab);
        local.reset(seed);
        RemoteEnv remote("127.0.0.1", server.port(), fx.vocab);
        auto [rs, rc] = remote.reset("pick", seed);
        auto chunks = fx.oracle_chunks(local.task());
        for (const auto& ch : chunks) {
          auto lr = local.step(ch);
          auto rr = remote.step(ch);
          if (lr.state.state_row != rr.state.state_row || lr.reward != rr.reward ||
              lr.done != rr.done) {
            failures[i] = "divergence at seed " + std::to_string(seed);
            return;
          }
          if (lr.done) break;
        }
        remote.close_session();
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (int i = 0; i < kSessions; ++i) CHECK(failures[i].empty());
  server.stop();
}
