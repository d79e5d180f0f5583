// flowact command line: data generation, the staged training recipe, PPO
// fine-tuning, evaluation, ablation grids and artifact inspection.

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <unistd.h>

#include "flowact/datagen/corpus.hpp"
#include "flowact/datagen/dataset_io.hpp"
#include "flowact/datagen/eigengrasp.hpp"
#include "flowact/envs/ood.hpp"
#include "flowact/envs/server.hpp"
#include "flowact/eval/evaluate.hpp"
#include "flowact/rl/runner.hpp"
#include "flowact/train/stages.hpp"

namespace fs = std::filesystem;
using namespace flowact;
using nlohmann::json;

namespace {

constexpr const char* kArtifactVersion = "0.1.0";

// ---- run configuration ------------------------------------------------------

struct RunConfig {
  json raw;

  PolicyConfig policy;
  CorpusSpec data_train, data_real, data_sft;
  StageConfig t2a, cpt, sft;
  PPOConfig rl;
  int rl_iterations = 6;
  std::uint64_t rl_seed = 14;
  EnvSpec rl_env;
  int eval_episodes = 24;
  std::uint64_t eval_seed_base = 500000;
  double eval_temperature = 0.6;
  int eval_sample_steps = 10;
  double oracle_floor = 0.5;  // acceptance floor for the final report
  double t2a_syn_ratio = 1.0;
};

json default_config_json() {
  json j;
  j["policy"] = {{"hidden", 128}, {"cond_blocks", 2}, {"dit_blocks", 4}, {"heads", 4},
                 {"time_embed_dim", 64}, {"projection", "zero-pad"}};
  j["data"] = {{"seed", 1},
               {"train_per_combo", 40},
               {"real_per_combo", 20},
               {"sft_per_combo", 30}};
  j["t2a"] = {{"stage", "t2a"}, {"steps", 2000}, {"batch_size", 16}, {"seed", 11},
              {"syn_ratio", 1.0},
              {"lr", {{"encoder", 1e-3}, {"decoder", 1e-3}, {"text-head", 1e-3}}}};
  j["cpt"] = {{"stage", "cpt"}, {"steps", 800}, {"batch_size", 16}, {"seed", 12},
              {"lr", {{"encoder", 1e-3}, {"decoder", 1e-3}, {"text-head", 1e-3}}}};
  j["sft"] = {{"stage", "sft"}, {"steps", 800}, {"batch_size", 16}, {"seed", 13},
              {"lr", {{"encoder", 5e-4}, {"decoder", 5e-4}, {"text-head", 5e-4}}}};
  j["rl"] = {{"iterations", 6},           {"n_envs", 16},     {"rollout_epochs", 2},
             {"env_steps_per_epoch", 64}, {"actor_lr", 3e-5}, {"value_lr", 6e-4},
             {"family", "pick-place"},    {"embodiment", "point-gripper"},
             {"max_steps", 512},          {"seed", 14}};
  j["eval"] = {{"episodes", 24}, {"seed_base", 500000}, {"temperature", 0.6},
               {"sample_steps", 10}, {"oracle_floor", 0.5}};
  return j;
}

json merge_json(json base, const json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
      base[it.key()] = merge_json(base[it.key()], *it);
    else
      base[it.key()] = *it;
  }
  return base;
}

RunConfig parse_run_config(const std::string& config_path) {
  json j = default_config_json();
  if (!config_path.empty()) j = merge_json(j, load_config_file(config_path));

  RunConfig rc;
  rc.raw = j;
  rc.policy = policy_config_from_json(j["policy"]);
  rc.policy.vocab_size = default_vocabulary().size();
  if (rc.policy.proj_dims.empty())
    for (const auto& e : toy_embodiments()) rc.policy.proj_dims.push_back({e.robot_tag, e.native_dim});
  rc.policy.validate();

  const json& d = j["data"];
  rc.data_train.seed = d.value("seed", 1);
  rc.data_train.episodes_per_combo = d.value("train_per_combo", 40);
  rc.data_train.corpus_tag = "syn";
  if (d.contains("embodiments"))
    rc.data_train.embodiments = d["embodiments"].get<std::vector<std::string>>();
  rc.data_real = rc.data_train;
  rc.data_real.episodes_per_combo = d.value("real_per_combo", 20);
  rc.data_real.seed = derive_seed(rc.data_train.seed, "real-corpus");
  rc.data_real.real_profile = true;
  rc.data_real.corpus_tag = "real";
  rc.data_sft = rc.data_train;
  rc.data_sft.episodes_per_combo = d.value("sft_per_combo", 30);
  rc.data_sft.seed = derive_seed(rc.data_train.seed, "sft-corpus");
  rc.data_sft.corpus_tag = "sft";

  rc.t2a = stage_from_json(j["t2a"]);
  rc.cpt = stage_from_json(j["cpt"]);
  rc.sft = stage_from_json(j["sft"]);
  rc.t2a_syn_ratio = j["t2a"].value("syn_ratio", 1.0);

  const json& r = j["rl"];
  rc.rl_iterations = r.value("iterations", 6);
  rc.rl_seed = r.value("seed", 14);
  rc.rl.n_envs = r.value("n_envs", 16);
  rc.rl.rollout_epochs = r.value("rollout_epochs", 2);
  rc.rl.env_steps_per_epoch = r.value("env_steps_per_epoch", 64);
  rc.rl.actor_lr = r.value("actor_lr", 3e-5);
  rc.rl.value_lr = r.value("value_lr", 6e-4);
  rc.rl.update_epochs = r.value("update_epochs", 4);
  rc.rl.minibatch_size = r.value("minibatch_size", 16);
  rc.rl.sde_steps = r.value("sde_steps", 10);
  rc.rl.rollout_temperature = r.value("rollout_temperature", 1.0);
  rc.rl.eval_temperature = r.value("eval_temperature", 0.6);
  rc.rl_env.spec_id = "rollout";
  rc.rl_env.family = family_from_name(r.value("family", std::string("pick-place")));
  rc.rl_env.embodiment_id = r.value("embodiment", std::string("point-gripper"));
  rc.rl_env.max_steps = r.value("max_steps", 512);

  const json& e = j["eval"];
  rc.eval_episodes = e.value("episodes", 24);
  rc.eval_seed_base = e.value("seed_base", 500000ull);
  rc.eval_temperature = e.value("temperature", 0.6);
  rc.eval_sample_steps = e.value("sample_steps", 10);
  rc.oracle_floor = e.value("oracle_floor", 0.5);
  return rc;
}

// ---- output locations and manifests ------------------------------------------

std::string output_root(const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (const char* env = std::getenv("FLOWACT_OUT")) return env;
  return "runs";
}

std::string timestamp() {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

class RunManifest {
 public:
  RunManifest(const fs::path& dir, const std::string& command, const RunConfig& rc)
      : path_(dir / "manifest.json") {
    doc_["command"] = command;
    doc_["artifact_version"] = kArtifactVersion;
    doc_["config"] = rc.raw;
    doc_["config_hash"] = config_hash(rc.raw);
    doc_["started"] = timestamp();
    doc_["lineage"] = json::array();
    doc_["files"] = json::array();
    doc_["metrics"] = json::array();
    if (fs::exists(path_)) {
      json prev = load_config_file(path_.string());
      if (prev.contains("lineage")) doc_["lineage"] = prev["lineage"];
      if (prev.contains("files")) doc_["files"] = prev["files"];
      if (prev.contains("metrics")) doc_["metrics"] = prev["metrics"];
      if (prev.contains("stages")) doc_["stages"] = prev["stages"];
    }
    flush();
  }

  void add_file(const fs::path& p) {
    doc_["files"].push_back(p.string());
    flush();
  }
  void add_metrics(const fs::path& p) {
    doc_["metrics"].push_back(p.string());
    flush();
  }
  void add_lineage(const std::string& stage, const fs::path& ckpt) {
    doc_["lineage"].push_back({{"stage", stage},
                               {"checkpoint", ckpt.string()},
                               {"hash", file_hash(ckpt.string())}});
    doc_["stages"][stage] = "done";
    add_file(ckpt);
  }
  bool stage_done(const std::string& stage) const {
    return doc_.contains("stages") && doc_["stages"].contains(stage);
  }
  void add_report(const std::string& name, const json& j) {
    doc_["reports"][name] = j;
    flush();
  }
  void finish() {
    doc_["finished"] = timestamp();
    flush();
  }

 private:
  void flush() {
    std::ofstream f(path_);
    f << doc_.dump(2) << "\n";
  }
  fs::path path_;
  json doc_;
};

// One pipeline per working directory.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (fs::exists(path_))
      raise(ErrorKind::config_error,
            "another run owns " + dir.string() + " (stale? remove " + path_.string() + ")");
    std::ofstream f(path_);
    f << "pid " << ::getpid() << "\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

MetricSink jsonl_sink(const fs::path& path) {
  auto out = std::make_shared<std::ofstream>(path, std::ios::app);
  return [out](const json& j) { (*out) << j.dump() << "\n"; };
}

// ---- data plumbing ------------------------------------------------------------

struct DataBundle {
  Corpus train, real, sft;
};

void write_corpus(const Corpus& corpus, const fs::path& dir, const std::string& name,
                  RunManifest& manifest) {
  auto base = (dir / name).string();
  write_dataset(corpus.episodes, base, (dir / "normalizers.tsv").string());
  manifest.add_file(manifest_path(base));
  manifest.add_file(blob_path(base));
}

Corpus load_corpus_from(const fs::path& dir, const std::string& name) {
  Corpus c;
  c.episodes = read_dataset((dir / name).string());
  c.normalizers = NormalizerTable::load((dir / "normalizers.tsv").string());
  return c;
}

DataBundle run_datagen(const RunConfig& rc, const fs::path& out, RunManifest& manifest) {
  const auto& vocab = default_vocabulary();
  fs::create_directories(out / "data");
  DataBundle b;
  b.train = generate_corpus(rc.data_train, vocab);
  b.real = generate_corpus(rc.data_real, vocab);
  b.sft = generate_corpus(rc.data_sft, vocab);

  // one table covering every dataset in the bundle
  NormalizerTable merged = b.train.normalizers;
  for (const auto& [id, s] : b.real.normalizers.entries()) merged.put(s);
  for (const auto& [id, s] : b.sft.normalizers.entries()) merged.put(s);
  b.train.normalizers = merged;
  b.real.normalizers = merged;
  b.sft.normalizers = merged;
  merged.save((out / "data" / "normalizers.tsv").string());
  manifest.add_file(out / "data" / "normalizers.tsv");

  vocab.save((out / "data" / "vocab.txt").string());
  manifest.add_file(out / "data" / "vocab.txt");

  write_corpus(b.train, out / "data", "train", manifest);
  write_corpus(b.real, out / "data", "real", manifest);
  write_corpus(b.sft, out / "data", "sft", manifest);
  return b;
}

DataBundle load_data(const fs::path& out) {
  DataBundle b;
  b.train = load_corpus_from(out / "data", "train");
  b.real = load_corpus_from(out / "data", "real");
  b.sft = load_corpus_from(out / "data", "sft");
  return b;
}

bool data_exists(const fs::path& out) {
  return fs::exists(out / "data" / "train.manifest.jsonl");
}

// ---- evaluation suites ---------------------------------------------------------

EnvSpec base_env_spec(const std::string& id, TemplateFamily fam, const std::string& emb) {
  EnvSpec s;
  s.spec_id = id;
  s.family = fam;
  s.embodiment_id = emb;
  return s;
}

EvalSuite in_dist_suite(const RunConfig& rc) {
  EvalSuite suite;
  suite.temperature = rc.eval_temperature;
  suite.sample_steps = rc.eval_sample_steps;
  auto add = [&](EnvSpec spec) {
    suite.entries.push_back({spec, EvalSuite::seed_range(rc.eval_seed_base, rc.eval_episodes)});
  };
  add(base_env_spec("pick-gripper", TemplateFamily::pick_place, "point-gripper"));
  add(base_env_spec("push-gripper", TemplateFamily::push, "point-gripper"));
  add(base_env_spec("nav-rotate", TemplateFamily::rotate_to_view, "planar-navigator"));
  return suite;
}

EvalSuite ood_suite(const RunConfig& rc) {
  EvalSuite suite;
  suite.temperature = rc.eval_temperature;
  suite.sample_steps = rc.eval_sample_steps;
  EnvSpec base = base_env_spec("pick-gripper", TemplateFamily::pick_place, "point-gripper");
  EnvSpec pinned = base;
  pinned.spec_id = "pick-gripper-pinned";
  pinned.sampler.forced_obj_color = "red";
  pinned.sampler.forced_dst_color = "blue";
  auto add = [&](EnvSpec spec) {
    suite.entries.push_back(
        {spec, EvalSuite::seed_range(rc.eval_seed_base + 10000, rc.eval_episodes)});
  };
  add(make_ood_variant(base, "position-shift"));
  add(make_ood_variant(base, "instruction-paraphrase"));
  add(make_ood_variant(base, "background-noise"));
  add(make_ood_variant(pinned, "reversed-binding"));
  return suite;
}

// ---- stages -----------------------------------------------------------------

Checkpoint make_checkpoint(const PolicyModel& model, const NormalizerTable& stats,
                           const std::string& stage, int step, std::uint64_t seed,
                           const Optimizer& opt, const std::string& lineage) {
  Checkpoint ck;
  ck.model = model;
  ck.vocab = default_vocabulary();
  ck.normalizers = stats;
  ck.stage = stage;
  ck.step = step;
  ck.master_seed = seed;
  ck.lineage = lineage;
  ck.opt_m1 = opt.moments1();
  ck.opt_m2 = opt.moments2();
  return ck;
}

// Merged syn/real corpus with source weights honoring the synthetic ratio.
TrainData t2a_train_data(const RunConfig& rc, const DataBundle& data, bool vision_override,
                         Corpus& storage) {
  storage = data.train;
  for (const auto& ep : data.real.episodes) storage.episodes.push_back(ep);
  TrainDataOptions opts;
  opts.with_obs = vision_override;
  opts.full_sequence = rc.t2a.t2a_mode == T2aMode::full_sequence;
  opts.state_tokens = rc.policy.state_tokens;
  opts.state_in_decoder = rc.policy.state_in_decoder;
  return TrainData(storage, default_vocabulary(), opts);
}

std::vector<MixSource> ratio_sources(const TrainData& td, double vl_weight, double syn_ratio) {
  auto sources = td.mix_sources(vl_weight);
  double action_total = 1.0 - vl_weight;
  int n_syn = 0, n_real = 0;
  for (const auto& s : sources) {
    if (s.name.rfind("syn/", 0) == 0 || s.name.rfind("sft/", 0) == 0) ++n_syn;
    if (s.name.rfind("real/", 0) == 0) ++n_real;
  }
  for (auto& s : sources) {
    if (s.name.rfind("real/", 0) == 0)
      s.weight = n_real ? action_total * (1.0 - syn_ratio) / n_real : 0.0;
    else if (s.name != "vl")
      s.weight = n_syn ? action_total * syn_ratio / n_syn : 0.0;
  }
  return sources;
}

PolicyModel stage_t2a(const RunConfig& rc, const DataBundle& data, const fs::path& out,
                      RunManifest& manifest) {
  const auto& vocab = default_vocabulary();
  auto model = PolicyModel::init(rc.policy, rc.t2a.seed, InitMode::standard);
  Corpus storage;
  TrainData td = t2a_train_data(rc, data, rc.t2a.t2a_vision_override, storage);
  auto opt = make_optimizer(rc.t2a);
  auto sink = jsonl_sink(out / "metrics_t2a.jsonl");
  manifest.add_metrics(out / "metrics_t2a.jsonl");

  StageConfig cfg = rc.t2a;
  if (rc.t2a_syn_ratio < 1.0) {
    // custom mixture over syn/real action sources
    cfg.frozen.insert("encoder");
    cfg.frozen.insert("text-head");
    cfg.vl_weight = 0.0;
    cfg.lambda_vl = 0.0;
    BatchMixer mixer(ratio_sources(td, 0.0, rc.t2a_syn_ratio), cfg.seed);
    opt.set_step(0);
    for (int step = 0; step < cfg.steps; ++step) {
      auto m = train_step(model, opt, mixer, td, cfg, vocab, step);
      nlohmann::json j{{"step", m.step}, {"stage", "t2a"}, {"loss_act", m.loss_act},
                       {"grad_norm", m.grad_norm}};
      sink(j);
    }
  } else {
    run_t2a(model, opt, cfg, td, vocab, sink);
  }
  auto ck = make_checkpoint(model, data.train.normalizers, "t2a", rc.t2a.steps, rc.t2a.seed, opt, "");
  save_checkpoint(ck, (out / "t2a.ckpt").string());
  manifest.add_lineage("t2a", out / "t2a.ckpt");
  return model;
}

PolicyModel stage_cpt(const RunConfig& rc, PolicyModel model, const DataBundle& data,
                      const fs::path& out, RunManifest& manifest, const std::string& parent_hash) {
  const auto& vocab = default_vocabulary();
  TrainDataOptions opts;
  opts.state_tokens = rc.policy.state_tokens;
  opts.state_in_decoder = rc.policy.state_in_decoder;
  TrainData td(data.train, vocab, opts);
  auto opt = make_optimizer(rc.cpt);
  auto sink = jsonl_sink(out / "metrics_cpt.jsonl");
  manifest.add_metrics(out / "metrics_cpt.jsonl");
  run_cpt(model, opt, rc.cpt, td, vocab, sink);
  auto ck = make_checkpoint(model, data.train.normalizers, "cpt", rc.cpt.steps, rc.cpt.seed, opt,
                            parent_hash);
  save_checkpoint(ck, (out / "cpt.ckpt").string());
  manifest.add_lineage("cpt", out / "cpt.ckpt");
  return model;
}

PolicyModel stage_sft(const RunConfig& rc, PolicyModel model, const DataBundle& data,
                      const fs::path& out, RunManifest& manifest, const std::string& parent_hash) {
  const auto& vocab = default_vocabulary();
  TrainDataOptions opts;
  opts.state_tokens = rc.policy.state_tokens;
  opts.state_in_decoder = rc.policy.state_in_decoder;
  TrainData td(data.sft, vocab, opts);
  auto opt = make_optimizer(rc.sft);
  auto sink = jsonl_sink(out / "metrics_sft.jsonl");
  manifest.add_metrics(out / "metrics_sft.jsonl");
  run_sft(model, opt, rc.sft, td, vocab, sink);
  auto ck = make_checkpoint(model, data.sft.normalizers, "sft", rc.sft.steps, rc.sft.seed, opt,
                            parent_hash);
  save_checkpoint(ck, (out / "sft.ckpt").string());
  manifest.add_lineage("sft", out / "sft.ckpt");
  return model;
}

PolicyModel stage_rl(const RunConfig& rc, PolicyModel model, const DataBundle& data,
                     const fs::path& out, RunManifest& manifest, const std::string& parent_hash) {
  const auto& vocab = default_vocabulary();
  const auto& stats = data.sft.normalizers.get("syn/" + rc.rl_env.embodiment_id);
  auto sink = jsonl_sink(out / "metrics_rl.jsonl");
  manifest.add_metrics(out / "metrics_rl.jsonl");
  run_rl(model, rc.rl_env, stats, rc.rl, rc.rl_iterations, vocab, rc.rl_seed, sink);
  Optimizer dummy{OptimizerConfig{}};
  auto ck = make_checkpoint(model, data.sft.normalizers, "rl", rc.rl_iterations, rc.rl_seed, dummy,
                            parent_hash);
  save_checkpoint(ck, (out / "rl.ckpt").string());
  manifest.add_lineage("rl", out / "rl.ckpt");
  return model;
}

EvalReport eval_model(const RunConfig& rc, const PolicyModel& model, const NormalizerTable& stats,
                      const EvalSuite& suite) {
  const auto& vocab = default_vocabulary();
  LearnedChunkPolicy policy(model, vocab, suite.temperature, suite.sample_steps);
  return evaluate_policy(policy, suite, stats, vocab);
}

// ---- exit-code mapping --------------------------------------------------------

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::config_error:
    case ErrorKind::invalid_argument: return 2;
    case ErrorKind::data_error:
    case ErrorKind::format_error:
    case ErrorKind::io_error:
    case ErrorKind::insufficient_data:
    case ErrorKind::planning_failure: return 3;
    case ErrorKind::numeric_error: return 4;
    case ErrorKind::transport_error:
    case ErrorKind::protocol_error: return 5;
  }
  return 1;
}

volatile std::sig_atomic_t g_stop = 0;
void handle_sigint(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowact: a desk-scale flow-matching action-policy training stack"};
  app.require_subcommand(1);

  std::string config_path, out_flag, resume_manifest, ckpt_path, axis;
  std::uint64_t seed_flag = 0;
  bool force = false, use_oracle = false, ood = false;
  int envs_flag = 0, port = 7060;
  double temperature_flag = -1.0;

  app.add_option("--config", config_path, "JSON config file");

  std::vector<CLI::Option*> seed_opts;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_flag, "output directory (default $FLOWACT_OUT or ./runs)");
    seed_opts.push_back(cmd->add_option("--seed", seed_flag, "seed override"));
    cmd->add_flag("--force", force, "bypass lineage and hash checks");
  };

  auto* c_datagen = app.add_subcommand("datagen", "generate the synthetic corpora");
  add_common(c_datagen);
  auto* c_t2a = app.add_subcommand("t2a", "stage I: text-to-action pretraining");
  add_common(c_t2a);
  auto* c_cpt = app.add_subcommand("cpt", "stage II: continued pretraining");
  add_common(c_cpt);
  c_cpt->add_option("--init", ckpt_path, "parent checkpoint (default <out>/t2a.ckpt)");
  auto* c_sft = app.add_subcommand("sft", "stage III: supervised fine-tuning");
  add_common(c_sft);
  c_sft->add_option("--init", ckpt_path, "parent checkpoint (default <out>/cpt.ckpt)");
  auto* c_rl = app.add_subcommand("rl", "stage IV: PPO fine-tuning");
  add_common(c_rl);
  c_rl->add_option("--init", ckpt_path, "parent checkpoint (default <out>/sft.ckpt)");
  c_rl->add_option("--envs", envs_flag, "parallel env instances");
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on the env suites");
  add_common(c_eval);
  c_eval->add_option("--ckpt", ckpt_path, "checkpoint to evaluate");
  c_eval->add_option("--temperature", temperature_flag, "sampling temperature (default 0.6)");
  c_eval->add_flag("--oracle", use_oracle, "evaluate the planner oracle instead");
  c_eval->add_flag("--ood", ood, "use the OOD suite");
  auto* c_ablate = app.add_subcommand("ablate", "run an ablation grid");
  add_common(c_ablate);
  c_ablate
      ->add_option("--axis", axis,
                   "t2a_ratio|t2a_mode|t2a_vision|timestep_pair|t2a_steps|projection|vl_mix|"
                   "state_conditioning")
      ->required();
  auto* c_pipeline =
      app.add_subcommand("pipeline", "datagen -> T2A -> CPT -> SFT -> RL -> eval");
  add_common(c_pipeline);
  c_pipeline->add_option("--resume", resume_manifest, "resume from a run manifest");
  auto* c_inspect =
      app.add_subcommand("inspect", "print prompt/chunk/mask renderings for a sample");
  add_common(c_inspect);
  auto* c_serve = app.add_subcommand("serve", "host the env server");
  add_common(c_serve);
  c_serve->add_option("--port", port, "listen port");

  CLI11_PARSE(app, argc, argv);
  bool seed_set = false;
  for (auto* o : seed_opts) seed_set = seed_set || o->count() > 0;

  try {
    RunConfig rc = parse_run_config(config_path);
    if (seed_set) {
      rc.data_train.seed = seed_flag;
      rc.data_real.seed = derive_seed(seed_flag, "real-corpus");
      rc.data_sft.seed = derive_seed(seed_flag, "sft-corpus");
      rc.t2a.seed = derive_seed(seed_flag, "t2a");
      rc.cpt.seed = derive_seed(seed_flag, "cpt");
      rc.sft.seed = derive_seed(seed_flag, "sft");
      rc.rl_seed = derive_seed(seed_flag, "rl");
    }
    if (envs_flag > 0) rc.rl.n_envs = envs_flag;

    fs::path out = output_root(out_flag);
    fs::create_directories(out);
    const auto& vocab = default_vocabulary();

    std::string cmdline;
    for (int i = 0; i < argc; ++i) cmdline += std::string(i ? " " : "") + argv[i];

    if (*c_datagen) {
      RunManifest manifest(out, cmdline, rc);
      run_datagen(rc, out, manifest);
      manifest.finish();
      std::cout << "datagen: corpora written under " << (out / "data").string() << "\n";
      return 0;
    }

    if (*c_t2a || *c_cpt || *c_sft || *c_rl) {
      RunManifest manifest(out, cmdline, rc);
      DataBundle data = data_exists(out) ? load_data(out) : run_datagen(rc, out, manifest);
      auto policy_json = policy_config_to_json(rc.policy);

      if (*c_t2a) {
        stage_t2a(rc, data, out, manifest);
      } else if (*c_cpt) {
        std::string parent = ckpt_path.empty() ? (out / "t2a.ckpt").string() : ckpt_path;
        auto ck = load_checkpoint(parent, &policy_json, force);
        stage_cpt(rc, std::move(ck.model), data, out, manifest, std::to_string(file_hash(parent)));
      } else if (*c_sft) {
        std::string parent = ckpt_path.empty() ? (out / "cpt.ckpt").string() : ckpt_path;
        auto ck = load_checkpoint(parent, &policy_json, force);
        stage_sft(rc, std::move(ck.model), data, out, manifest, std::to_string(file_hash(parent)));
      } else {
        std::string parent = ckpt_path.empty() ? (out / "sft.ckpt").string() : ckpt_path;
        auto ck = load_checkpoint(parent, &policy_json, force);
        if (ck.stage != "sft" && !force)
          raise(ErrorKind::config_error,
                "rl expects an sft parent checkpoint (found stage '" + ck.stage +
                    "'); pass --force to override");
        stage_rl(rc, std::move(ck.model), data, out, manifest, std::to_string(file_hash(parent)));
      }
      manifest.finish();
      return 0;
    }

    if (*c_eval) {
      RunManifest manifest(out, cmdline, rc);
      EvalSuite suite = ood ? ood_suite(rc) : in_dist_suite(rc);
      if (temperature_flag >= 0.0) suite.temperature = temperature_flag;
      EvalReport report;
      if (use_oracle) {
        DataBundle data = data_exists(out) ? load_data(out) : run_datagen(rc, out, manifest);
        OracleChunkPolicy oracle(vocab);
        report = evaluate_policy(oracle, suite, data.train.normalizers, vocab);
      } else {
        if (ckpt_path.empty()) ckpt_path = (out / "rl.ckpt").string();
        auto policy_json = policy_config_to_json(rc.policy);
        auto ck = load_checkpoint(ckpt_path, &policy_json, force);
        LearnedChunkPolicy policy(ck.model, vocab, suite.temperature, rc.eval_sample_steps);
        report = evaluate_policy(policy, suite, ck.normalizers, vocab);
      }
      auto table_path = out / (ood ? "eval_ood.jsonl" : "eval.jsonl");
      std::ofstream tf(table_path);
      for (const auto& row : report.to_json()["rows"]) tf << row.dump() << "\n";
      manifest.add_file(table_path);
      manifest.add_report(ood ? "ood" : "in_dist", report.to_json());
      manifest.finish();
      std::cout << report.summary();
      return 0;
    }

    if (*c_pipeline) {
      DirLock lock(out);
      RunManifest manifest(out, cmdline, rc);
      DataBundle data = data_exists(out) ? load_data(out) : run_datagen(rc, out, manifest);
      auto policy_json = policy_config_to_json(rc.policy);

      PolicyModel model = PolicyModel::init(rc.policy, rc.t2a.seed, InitMode::standard);
      if (manifest.stage_done("t2a") && fs::exists(out / "t2a.ckpt"))
        model = load_checkpoint((out / "t2a.ckpt").string(), &policy_json, force).model;
      else
        model = stage_t2a(rc, data, out, manifest);

      if (manifest.stage_done("cpt") && fs::exists(out / "cpt.ckpt"))
        model = load_checkpoint((out / "cpt.ckpt").string(), &policy_json, force).model;
      else
        model = stage_cpt(rc, std::move(model), data, out, manifest,
                          std::to_string(file_hash((out / "t2a.ckpt").string())));

      if (manifest.stage_done("sft") && fs::exists(out / "sft.ckpt"))
        model = load_checkpoint((out / "sft.ckpt").string(), &policy_json, force).model;
      else
        model = stage_sft(rc, std::move(model), data, out, manifest,
                          std::to_string(file_hash((out / "cpt.ckpt").string())));

      if (manifest.stage_done("rl") && fs::exists(out / "rl.ckpt"))
        model = load_checkpoint((out / "rl.ckpt").string(), &policy_json, force).model;
      else
        model = stage_rl(rc, std::move(model), data, out, manifest,
                         std::to_string(file_hash((out / "sft.ckpt").string())));

      auto in_report = eval_model(rc, model, data.train.normalizers, in_dist_suite(rc));
      auto ood_report = eval_model(rc, model, data.train.normalizers, ood_suite(rc));
      manifest.add_report("in_dist", in_report.to_json());
      manifest.add_report("ood", ood_report.to_json());
      std::ofstream rt(out / "report.txt");
      rt << in_report.summary() << "\n" << ood_report.summary();
      manifest.add_file(out / "report.txt");
      manifest.finish();
      std::cout << in_report.summary() << ood_report.summary();
      std::cout << "pipeline complete; in-distribution aggregate " << in_report.aggregate
                << " (configured floor " << rc.oracle_floor << ")\n";
      return 0;
    }

    if (*c_ablate) {
      RunManifest manifest(out, cmdline, rc);
      DataBundle data = data_exists(out) ? load_data(out) : run_datagen(rc, out, manifest);
      json cells = json::array();

      auto run_cell = [&](const std::string& name, RunConfig cell_rc) {
        fs::path cell_dir = out / ("cell_" + name);
        fs::create_directories(cell_dir);
        RunManifest cell_manifest(cell_dir, cmdline + " [cell " + name + "]", cell_rc);
        auto model = stage_t2a(cell_rc, data, cell_dir, cell_manifest);
        model = stage_sft(cell_rc, std::move(model), data, cell_dir, cell_manifest,
                          std::to_string(file_hash((cell_dir / "t2a.ckpt").string())));
        auto report = eval_model(cell_rc, model, data.train.normalizers, in_dist_suite(cell_rc));
        cell_manifest.add_report("in_dist", report.to_json());
        cell_manifest.finish();
        json cell;
        cell["cell"] = name;
        cell["aggregate_success"] = report.aggregate;
        cell["rows"] = report.to_json()["rows"];
        cells.push_back(cell);
        std::cout << "cell " << name << ": aggregate " << report.aggregate << "\n";
      };

      if (axis == "t2a_mode") {
        for (auto mode : {T2aMode::full_sequence, T2aMode::chunk}) {
          RunConfig cell = rc;
          cell.t2a.t2a_mode = mode;
          run_cell(mode == T2aMode::chunk ? "chunk" : "full-sequence", cell);
        }
      } else if (axis == "t2a_vision") {
        RunConfig blind = rc;
        run_cell("vision-free", blind);
        RunConfig sighted = rc;
        sighted.t2a.t2a_vision_override = true;
        run_cell("with-vision", sighted);
      } else if (axis == "t2a_steps") {
        for (int steps : {0, rc.t2a.steps / 4, rc.t2a.steps, rc.t2a.steps * 2}) {
          RunConfig cell = rc;
          cell.t2a.steps = steps;
          run_cell("steps-" + std::to_string(steps), cell);
        }
      } else if (axis == "timestep_pair") {
        for (const char* a : {"sigmoid-normal", "beta"})
          for (const char* b : {"beta", "sigmoid-normal"}) {
            RunConfig cell = rc;
            cell.t2a.timestep = TimestepDist::from_name(a);
            cell.sft.timestep = TimestepDist::from_name(b);
            run_cell(std::string("t2a-") + a + "+sft-" + b, cell);
          }
      } else if (axis == "projection") {
        for (auto kind :
             {ProjectionKind::multi_mlp, ProjectionKind::concat, ProjectionKind::zero_pad}) {
          RunConfig cell = rc;
          cell.policy.projection = kind;
          run_cell(projection_kind_name(kind), cell);
        }
      } else if (axis == "vl_mix") {
        for (bool on : {true, false}) {
          RunConfig cell = rc;
          if (!on) {
            cell.sft.vl_weight = 0.0;
            cell.sft.lambda_vl = 0.0;
            cell.cpt.vl_weight = 0.0;
            cell.cpt.lambda_vl = 0.0;
          }
          run_cell(on ? "vl-on" : "vl-off", cell);
        }
      } else if (axis == "state_conditioning") {
        for (const char* mode : {"none", "prompt", "decoder"}) {
          RunConfig cell = rc;
          cell.policy.state_tokens = std::string(mode) == "prompt";
          cell.policy.state_in_decoder = std::string(mode) == "decoder";
          run_cell(std::string("state-") + mode, cell);
        }
      } else if (axis == "t2a_ratio") {
        for (double ratio : {0.0, 0.2, 0.5, 1.0}) {
          RunConfig cell = rc;
          cell.t2a_syn_ratio = ratio;
          char buf[16];
          std::snprintf(buf, sizeof(buf), "%.0f", ratio * 100);
          run_cell(std::string("syn") + buf, cell);
        }
      } else {
        raise(ErrorKind::config_error, "unknown ablation axis: " + axis);
      }
      manifest.add_report("ablation_" + axis, cells);
      std::ofstream tf(out / ("ablation_" + axis + ".jsonl"));
      for (const auto& c : cells) tf << c.dump() << "\n";
      manifest.add_file(out / ("ablation_" + axis + ".jsonl"));
      manifest.finish();
      return 0;
    }

    if (*c_inspect) {
      std::uint64_t seed = seed_set ? seed_flag : 7;
      auto inst = sample_task_instance(TemplateFamily::pick_place, "point-gripper", seed, vocab);
      auto ep = plan_trajectory(inst, vocab);
      const auto& es = embodiment("point-gripper");
      auto prompt =
          render_embodiment_prompt(es, inst.instruction.prompt_form(), es.default_horizon);
      std::cout << "instruction : " << inst.instruction.text << "\n";
      std::cout << "prompt      : " << prompt << "\n";
      auto ids = tokenize(prompt, vocab);
      std::cout << "tokens (" << ids.size() << ")  :";
      for (int id : ids) std::cout << " " << id;
      std::cout << "\nepisode     : T=" << ep.num_states() << " action_dim=" << ep.action_dim
                << " segments=" << ep.planner_segments << " hz=" << ep.control_hz << "\n";
      auto chunk = chunk_episode(ep, 0);
      std::cout << "chunk mask  : c=" << chunk.c << " H_task=" << chunk.H_task << " ("
                << chunk.mask.popcount() << " valid cells)\n";
      for (int h = 0; h < chunk.mask.H; ++h) {
        std::cout << "  ";
        for (int k = 0; k < chunk.mask.K; ++k) std::cout << (chunk.mask.at(h, k) ? '#' : '.');
        std::cout << "\n";
      }
      auto basis = fit_eigengrasps(synthesize_hand_poses(128, 10, 0.01, seed));
      std::cout << "eigengrasps : leading explained variance";
      for (int i = 0; i < 3; ++i) std::cout << " " << basis.explained[i];
      std::cout << "\n";
      return 0;
    }

    if (*c_serve) {
      std::map<std::string, EnvSpec> registry;
      std::map<std::string, NormalizerStats> stats;
      DataBundle data;
      if (data_exists(out)) {
        data = load_data(out);
      } else {
        RunManifest manifest(out, cmdline, rc);
        data = run_datagen(rc, out, manifest);
        manifest.finish();
      }
      for (auto spec : {base_env_spec("pick-gripper", TemplateFamily::pick_place, "point-gripper"),
                        base_env_spec("push-gripper", TemplateFamily::push, "point-gripper"),
                        base_env_spec("nav-rotate", TemplateFamily::rotate_to_view,
                                      "planar-navigator")}) {
        registry[spec.spec_id] = spec;
        stats[spec.spec_id] = data.train.normalizers.get("syn/" + spec.embodiment_id);
      }
      EnvServer server(registry, stats, vocab);
      server.start(port);
      std::signal(SIGINT, handle_sigint);
      std::cout << "env server listening on 127.0.0.1:" << server.port() << " (ctrl-c to stop)\n";
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << error_kind_name(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
