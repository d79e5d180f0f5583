#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "flowact/common.hpp"
#include "flowact/policy/params.hpp"
#include "flowact/policy/timestep.hpp"

namespace flowact {

enum class Stage { t2a, cpt, sft };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::t2a: return "t2a";
    case Stage::cpt: return "cpt";
    case Stage::sft: return "sft";
  }
  return "?";
}

inline Stage stage_from_name(const std::string& s) {
  if (s == "t2a") return Stage::t2a;
  if (s == "cpt") return Stage::cpt;
  if (s == "sft") return Stage::sft;
  raise(ErrorKind::config_error, "unknown stage: " + s);
}

enum class T2aMode { full_sequence, chunk };

struct StageConfig {
  Stage stage = Stage::t2a;
  int steps = 2000;
  std::uint64_t seed = 1;
  int batch_size = 16;
  double lambda_act = 1.0;
  double lambda_vl = 0.1;
  TimestepDist timestep = TimestepDist::sigmoid_normal(0.0, 1.0);
  T2aMode t2a_mode = T2aMode::full_sequence;
  bool t2a_vision_override = false;  // ablation-only bypass of the vision-free contract
  std::map<std::string, double> lr = {
      {"encoder", 1e-3}, {"decoder", 1e-3}, {"text-head", 1e-3}};
  double lr_floor = 0.0;
  double grad_clip = 1.0;
  double weight_decay = 0.01;
  double vl_weight = 0.08;  // share of vision-language samples in the mixture
  std::set<std::string> frozen;  // parameter groups excluded from updates

  void validate() const {
    if (steps < 0 || batch_size < 1) raise(ErrorKind::config_error, "bad stage steps/batch");
    if (vl_weight < 0.0 || vl_weight >= 1.0)
      raise(ErrorKind::config_error, "vl_weight outside [0,1)");
  }

  // The paper-shaped defaults per stage.
  static StageConfig defaults(Stage s) {
    StageConfig c;
    c.stage = s;
    switch (s) {
      case Stage::t2a:
        c.steps = 2000;
        c.timestep = TimestepDist::sigmoid_normal(0.0, 1.0);
        c.lambda_vl = 0.0;
        c.vl_weight = 0.0;
        c.frozen = {"encoder", "text-head"};
        break;
      case Stage::cpt:
        c.steps = 1000;
        c.timestep = TimestepDist::beta_dist(1.0, 1.5);
        c.lambda_act = 1.0;
        c.lambda_vl = 0.1;
        c.vl_weight = 0.08;
        break;
      case Stage::sft:
        c.steps = 1000;
        c.timestep = TimestepDist::beta_dist(1.0, 1.5);
        c.lambda_act = 1.0;
        c.lambda_vl = 0.1;
        c.vl_weight = 0.08;
        break;
    }
    return c;
  }
};

// ---- JSON round trip --------------------------------------------------------

inline nlohmann::json timestep_to_json(const TimestepDist& d) {
  nlohmann::json j;
  j["kind"] = d.name();
  if (d.kind == TimestepDist::Kind::beta) {
    j["alpha"] = d.alpha;
    j["beta"] = d.beta;
  } else {
    j["mean"] = d.mean;
    j["stddev"] = d.stddev;
  }
  return j;
}

inline TimestepDist timestep_from_json(const nlohmann::json& j) {
  if (j.is_string()) return TimestepDist::from_name(j.get<std::string>());
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "beta") return TimestepDist::beta_dist(j.value("alpha", 1.0), j.value("beta", 1.5));
  return TimestepDist::sigmoid_normal(j.value("mean", 0.0), j.value("stddev", 1.0));
}

inline nlohmann::json stage_to_json(const StageConfig& c) {
  nlohmann::json j;
  j["stage"] = stage_name(c.stage);
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["batch_size"] = c.batch_size;
  j["lambda_act"] = c.lambda_act;
  j["lambda_vl"] = c.lambda_vl;
  j["timestep"] = timestep_to_json(c.timestep);
  j["t2a_mode"] = c.t2a_mode == T2aMode::full_sequence ? "full-sequence" : "chunk";
  j["lr"] = c.lr;
  j["lr_floor"] = c.lr_floor;
  j["grad_clip"] = c.grad_clip;
  j["weight_decay"] = c.weight_decay;
  j["vl_weight"] = c.vl_weight;
  j["frozen"] = c.frozen;
  return j;
}

inline StageConfig stage_from_json(const nlohmann::json& j) {
  StageConfig c = StageConfig::defaults(stage_from_name(j.at("stage").get<std::string>()));
  if (j.contains("steps")) c.steps = j["steps"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("lambda_act")) c.lambda_act = j["lambda_act"].get<double>();
  if (j.contains("lambda_vl")) c.lambda_vl = j["lambda_vl"].get<double>();
  if (j.contains("timestep")) c.timestep = timestep_from_json(j["timestep"]);
  if (j.contains("t2a_mode"))
    c.t2a_mode = j["t2a_mode"] == "chunk" ? T2aMode::chunk : T2aMode::full_sequence;
  if (j.contains("t2a_vision_override"))
    c.t2a_vision_override = j["t2a_vision_override"].get<bool>();
  if (j.contains("lr")) c.lr = j["lr"].get<std::map<std::string, double>>();
  if (j.contains("lr_floor")) c.lr_floor = j["lr_floor"].get<double>();
  if (j.contains("grad_clip")) c.grad_clip = j["grad_clip"].get<double>();
  if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("vl_weight")) c.vl_weight = j["vl_weight"].get<double>();
  if (j.contains("frozen")) c.frozen = j["frozen"].get<std::set<std::string>>();
  c.validate();
  return c;
}

inline nlohmann::json policy_config_to_json(const PolicyConfig& c) {
  nlohmann::json j;
  j["hidden"] = c.hidden;
  j["cond_blocks"] = c.cond_blocks;
  j["dit_blocks"] = c.dit_blocks;
  j["heads"] = c.heads;
  j["time_embed_dim"] = c.time_embed_dim;
  j["mlp_mult"] = c.mlp_mult;
  j["vocab_size"] = c.vocab_size;
  j["horizon"] = c.horizon;
  j["channel_cap"] = c.channel_cap;
  j["max_seq"] = c.max_seq;
  j["obs_dim"] = c.obs_dim;
  j["projection"] = projection_kind_name(c.projection);
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& [id, d] : c.proj_dims) dims.push_back({{"id", id}, {"dim", d}});
  j["proj_dims"] = dims;
  j["state_tokens"] = c.state_tokens;
  j["state_in_decoder"] = c.state_in_decoder;
  j["state_inject_dim"] = c.state_inject_dim;
  return j;
}

inline PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.hidden = j.value("hidden", 128);
  c.cond_blocks = j.value("cond_blocks", 2);
  c.dit_blocks = j.value("dit_blocks", 4);
  c.heads = j.value("heads", 4);
  c.time_embed_dim = j.value("time_embed_dim", 64);
  c.mlp_mult = j.value("mlp_mult", 4);
  c.vocab_size = j.value("vocab_size", 0);
  c.horizon = j.value("horizon", kHorizon);
  c.channel_cap = j.value("channel_cap", kChannelCap);
  c.max_seq = j.value("max_seq", 160);
  c.obs_dim = j.value("obs_dim", 24);
  c.projection = projection_kind_from_name(j.value("projection", std::string("zero-pad")));
  if (j.contains("proj_dims"))
    for (const auto& d : j["proj_dims"])
      c.proj_dims.push_back({d.at("id").get<std::string>(), d.at("dim").get<int>()});
  c.state_tokens = j.value("state_tokens", false);
  c.state_in_decoder = j.value("state_in_decoder", false);
  c.state_inject_dim = j.value("state_inject_dim", 24);
  return c;
}

// Canonical form: parse and re-dump with sorted keys and two-space indent.
// canon(canon(x)) == canon(x).
inline std::string canonical_config(const nlohmann::json& j) { return j.dump(2); }

inline std::uint64_t config_hash(const nlohmann::json& j) {
  return fnv1a64(canonical_config(j));
}

inline nlohmann::json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorKind::io_error, "cannot read config " + path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) raise(ErrorKind::config_error, "config is not valid JSON: " + path);
  return j;
}

}  // namespace flowact
