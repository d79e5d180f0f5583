#pragma once

#include <fstream>
#include <string>
#include <unordered_map>

#include "flowact/core/normalizer.hpp"
#include "flowact/policy/params.hpp"
#include "flowact/text/vocab.hpp"
#include "flowact/train/config.hpp"

namespace flowact {

// Self-contained training snapshot: policy weights and optimizer moments as
// float32 blobs, plus the vocabulary and normalizer tables the weights were
// trained against. Loading against a different policy architecture is
// refused via the config hash.
struct Checkpoint {
  PolicyModel model;
  Vocabulary vocab;
  NormalizerTable normalizers;
  std::string stage;
  int step = 0;
  std::uint64_t master_seed = 0;
  std::string lineage;  // parent checkpoint content hash, "" for roots
  std::unordered_map<std::string, Tensor> opt_m1, opt_m2;

  std::uint64_t policy_hash() const { return config_hash(policy_config_to_json(model.cfg)); }
};

namespace detail {

inline void write_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}
inline std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

inline void write_blob(std::ofstream& f, const std::string& name, const Tensor& t) {
  write_u32(f, static_cast<std::uint32_t>(name.size()));
  f.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(f, static_cast<std::uint32_t>(t.rows));
  write_u32(f, static_cast<std::uint32_t>(t.cols));
  std::vector<float> data(t.data.size());
  for (std::size_t i = 0; i < t.data.size(); ++i) data[i] = static_cast<float>(t.data[i]);
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
}

inline std::pair<std::string, Tensor> read_blob(std::ifstream& f, const std::string& path) {
  std::uint32_t name_len = read_u32(f);
  if (!f || name_len > 4096) raise(ErrorKind::format_error, "corrupt blob header in " + path);
  std::string name(name_len, '\0');
  f.read(name.data(), name_len);
  int rows = static_cast<int>(read_u32(f));
  int cols = static_cast<int>(read_u32(f));
  Tensor t(rows, cols);
  std::vector<float> data(t.data.size());
  f.read(reinterpret_cast<char*>(data.data()),
         static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!f) raise(ErrorKind::format_error, "truncated blob " + name + " in " + path);
  for (std::size_t i = 0; i < data.size(); ++i) t.data[i] = static_cast<double>(data[i]);
  return {std::move(name), std::move(t)};
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'F', 'A', 'C', 'K', 'P', 'T', '0', '1'};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) raise(ErrorKind::io_error, "cannot write checkpoint " + path);
  f.write(kCheckpointMagic, 8);

  nlohmann::json header;
  header["stage"] = ck.stage;
  header["step"] = ck.step;
  header["seed"] = ck.master_seed;
  header["policy"] = policy_config_to_json(ck.model.cfg);
  header["config_hash"] = ck.policy_hash();
  header["vocab"] = ck.vocab.to_text();
  header["normalizers"] = ck.normalizers.to_text();
  header["lineage"] = ck.lineage;
  std::string hs = header.dump();
  detail::write_u32(f, static_cast<std::uint32_t>(hs.size()));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  std::uint32_t count = static_cast<std::uint32_t>(ck.model.store.items().size() +
                                                   ck.opt_m1.size() + ck.opt_m2.size());
  detail::write_u32(f, count);
  for (const auto& p : ck.model.store.items()) detail::write_blob(f, "p/" + p.name, p.value);
  for (const auto& p : ck.model.store.items()) {
    auto m1 = ck.opt_m1.find(p.name);
    if (m1 != ck.opt_m1.end()) detail::write_blob(f, "m/" + p.name, m1->second);
    auto m2 = ck.opt_m2.find(p.name);
    if (m2 != ck.opt_m2.end()) detail::write_blob(f, "v/" + p.name, m2->second);
  }
  if (!f) raise(ErrorKind::io_error, "short write for checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path,
                                  const nlohmann::json* expected_policy = nullptr,
                                  bool force = false) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorKind::io_error, "cannot read checkpoint " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    raise(ErrorKind::format_error, "not a checkpoint file: " + path);
  std::uint32_t hlen = detail::read_u32(f);
  std::string hs(hlen, '\0');
  f.read(hs.data(), hlen);
  nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
  if (header.is_discarded()) raise(ErrorKind::format_error, "corrupt checkpoint header: " + path);

  if (expected_policy && !force) {
    std::uint64_t expect = config_hash(*expected_policy);
    std::uint64_t got = header.at("config_hash").get<std::uint64_t>();
    if (expect != got)
      raise(ErrorKind::config_error,
            "checkpoint config hash mismatch for " + path + ": expected " +
                std::to_string(expect) + ", found " + std::to_string(got) +
                " (pass --force to override)");
  }

  Checkpoint ck;
  ck.stage = header.at("stage").get<std::string>();
  ck.step = header.at("step").get<int>();
  ck.master_seed = header.at("seed").get<std::uint64_t>();
  ck.lineage = header.value("lineage", std::string());
  ck.vocab = Vocabulary::from_text(header.at("vocab").get<std::string>());
  ck.normalizers = NormalizerTable::from_text(header.at("normalizers").get<std::string>());
  PolicyConfig cfg = policy_config_from_json(header.at("policy"));
  ck.model = PolicyModel::init(cfg, 0, InitMode::standard);

  std::uint32_t count = detail::read_u32(f);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, tensor] = detail::read_blob(f, path);
    if (name.rfind("p/", 0) == 0) {
      Parameter& p = ck.model.store.at(name.substr(2));
      if (!p.value.same_shape(tensor))
        raise(ErrorKind::format_error, "checkpoint blob shape mismatch: " + name);
      p.value = std::move(tensor);
    } else if (name.rfind("m/", 0) == 0) {
      ck.opt_m1[name.substr(2)] = std::move(tensor);
    } else if (name.rfind("v/", 0) == 0) {
      ck.opt_m2[name.substr(2)] = std::move(tensor);
    } else {
      raise(ErrorKind::format_error, "unknown checkpoint blob: " + name);
    }
  }
  return ck;
}

inline std::uint64_t file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorKind::io_error, "cannot hash " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return fnv1a64(os.str());
}

}  // namespace flowact
