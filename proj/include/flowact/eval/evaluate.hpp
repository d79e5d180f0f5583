#pragma once

#include <functional>
#include <memory>

#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "flowact/envs/env.hpp"
#include "flowact/eval/oracle.hpp"
#include "flowact/policy/sampling.hpp"

namespace flowact {

// A policy that emits one chunk per env decision point.
struct ChunkPolicy {
  virtual ~ChunkPolicy() = default;
  virtual void on_reset(ToyEnv& env, const NormalizerStats& stats) {}
  virtual ActionChunk act(ToyEnv& env, const NormalizerStats& stats, std::uint64_t seed) = 0;
};

// Flow-matching policy sampled at a fixed temperature (0 selects the
// deterministic Euler path).
class LearnedChunkPolicy : public ChunkPolicy {
 public:
  LearnedChunkPolicy(const PolicyModel& model, const Vocabulary& vocab, double temperature,
                     int sample_steps)
      : model_(&model), vocab_(&vocab), temperature_(temperature), steps_(sample_steps) {}

  ActionChunk act(ToyEnv& env, const NormalizerStats&, std::uint64_t seed) override {
    Conditioning cond = env.conditioning();
    const EmbodimentSpec& es = embodiment(cond.embodiment_id);
    Tensor y;
    if (temperature_ == 0.0) {
      y = euler_sample(*model_, cond, *vocab_, steps_, seed);
    } else {
      SamplerConfig sc;
      sc.n_steps = steps_;
      y = sde_sample_with_trace(*model_, cond, *vocab_, sc, temperature_, seed).first;
    }
    ActionChunk chunk;
    chunk.c = es.native_dim;
    chunk.H_task = es.default_horizon;
    chunk.embodiment_id = cond.embodiment_id;
    chunk.mask = build_mask(chunk.c, chunk.H_task);
    chunk.values = Tensor::zeros(kHorizon, kChannelCap);
    for (int h = 0; h < chunk.H_task; ++h)
      for (int k = 0; k < chunk.c; ++k) chunk.values.at(h, k) = y.at(h, k);
    return chunk;
  }

 private:
  const PolicyModel* model_;
  const Vocabulary* vocab_;
  double temperature_;
  int steps_;
};

// The planner wrapped as a policy: the in-distribution upper bound.
class OracleChunkPolicy : public ChunkPolicy {
 public:
  explicit OracleChunkPolicy(const Vocabulary& vocab) : oracle_(vocab) {}

  void on_reset(ToyEnv& env, const NormalizerStats&) override {
    oracle_.start_episode(env.task());
  }

  ActionChunk act(ToyEnv& env, const NormalizerStats& stats, std::uint64_t) override {
    if (oracle_.exhausted()) oracle_.start_episode(env.task());  // replan from scratch
    return oracle_.next_chunk(env.state().state_row, stats);
  }

 private:
  OraclePolicy oracle_;
};

struct EvalSuite {
  struct Entry {
    EnvSpec spec;
    std::vector<std::uint64_t> seeds;
  };
  std::vector<Entry> entries;
  double temperature = 0.6;
  int sample_steps = 10;
  int max_chunks = 48;

  static std::vector<std::uint64_t> seed_range(std::uint64_t base, int episodes) {
    std::vector<std::uint64_t> s;
    for (int i = 0; i < episodes; ++i) s.push_back(base + i);
    return s;
  }
};

struct EvalReport {
  struct Row {
    std::string spec_id;
    int episodes = 0;
    int successes = 0;
    double success_rate = 0.0;
    std::vector<std::uint64_t> seeds;
  };
  std::vector<Row> rows;
  double aggregate = 0.0;
  double temperature = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["temperature"] = temperature;
    j["aggregate_success"] = aggregate;
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows)
      rs.push_back({{"spec", r.spec_id},
                    {"episodes", r.episodes},
                    {"successes", r.successes},
                    {"success_rate", r.success_rate},
                    {"seeds", r.seeds}});
    j["rows"] = rs;
    return j;
  }

  std::string summary() const {
    std::ostringstream os;
    os << "evaluation summary (temperature " << temperature << ")\n";
    for (const auto& r : rows) {
      os << "  " << r.spec_id << ": " << r.successes << "/" << r.episodes << " = "
         << r.success_rate << "\n";
    }
    os << "  aggregate: " << aggregate << "\n";
    return os.str();
  }

  double rate_of(const std::string& spec_id) const {
    for (const auto& r : rows)
      if (r.spec_id == spec_id) return r.success_rate;
    raise(ErrorKind::invalid_argument, "no eval row for spec " + spec_id);
  }
};

// Deterministic suite evaluation: per-spec success rates over the exact seed
// list plus the aggregate mean.
inline EvalReport evaluate_policy(ChunkPolicy& policy, const EvalSuite& suite,
                                  const NormalizerTable& stats, const Vocabulary& vocab) {
  if (suite.entries.empty()) raise(ErrorKind::invalid_argument, "evaluate: empty suite");
  EvalReport report;
  report.temperature = suite.temperature;
  double total_rate = 0.0;
  for (const auto& entry : suite.entries) {
    const NormalizerStats& st = stats.get("syn/" + entry.spec.embodiment_id);
    EvalReport::Row row;
    row.spec_id = entry.spec.spec_id;
    row.seeds = entry.seeds;
    for (std::uint64_t seed : entry.seeds) {
      ToyEnv env(entry.spec, st, vocab);
      env.reset(seed);
      policy.on_reset(env, st);
      bool success = false;
      for (int c = 0; c < suite.max_chunks; ++c) {
        auto chunk = policy.act(env, st, derive_seed(seed, "eval-chunk", c));
        auto r = env.step(chunk);
        if (r.done) {
          success = r.state.success;
          break;
        }
      }
      row.episodes += 1;
      row.successes += success ? 1 : 0;
    }
    row.success_rate = row.episodes ? static_cast<double>(row.successes) / row.episodes : 0.0;
    total_rate += row.success_rate;
    report.rows.push_back(std::move(row));
  }
  report.aggregate = total_rate / suite.entries.size();
  return report;
}

}  // namespace flowact
