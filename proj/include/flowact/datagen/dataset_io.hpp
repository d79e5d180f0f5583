#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowact/common.hpp"
#include "flowact/episode.hpp"

namespace flowact {

// Dataset format: <base>.manifest.jsonl holds one structured-text record per
// line (header first, then one per episode with blob offsets); <base>.blob
// holds little-endian float32 payloads. Round-trips are bit-exact.

struct DatasetManifest {
  std::string base_path;
  int episode_count = 0;
  std::map<std::string, int> per_dataset_counts;
  std::string normalizer_ref;  // path of the stats table, when written
};

inline std::string manifest_path(const std::string& base) { return base + ".manifest.jsonl"; }
inline std::string blob_path(const std::string& base) { return base + ".blob"; }

inline DatasetManifest write_dataset(const std::vector<Episode>& episodes,
                                     const std::string& base,
                                     const std::string& normalizer_ref = "") {
  std::ofstream blob(blob_path(base), std::ios::binary);
  if (!blob) raise(ErrorKind::io_error, "cannot write " + blob_path(base));
  std::ofstream man(manifest_path(base), std::ios::binary);
  if (!man) raise(ErrorKind::io_error, "cannot write " + manifest_path(base));

  DatasetManifest out;
  out.base_path = base;
  out.episode_count = static_cast<int>(episodes.size());
  for (const auto& ep : episodes) out.per_dataset_counts[ep.dataset_id]++;
  out.normalizer_ref = normalizer_ref;

  nlohmann::json header;
  header["kind"] = "flowact-dataset";
  header["version"] = 1;
  header["episodes"] = out.episode_count;
  header["per_dataset_counts"] = out.per_dataset_counts;
  if (!normalizer_ref.empty()) header["normalizer"] = normalizer_ref;
  man << header.dump() << "\n";

  std::uint64_t offset = 0;  // float index into the blob
  auto write_block = [&](const std::vector<float>& v) {
    std::uint64_t at = offset;
    blob.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(float)));
    offset += v.size();
    return at;
  };

  for (const auto& ep : episodes) {
    nlohmann::json rec;
    rec["id"] = ep.id;
    rec["dataset"] = ep.dataset_id;
    rec["family"] = ep.family;
    rec["embodiment"] = ep.embodiment_id;
    rec["instruction"] = ep.instruction;
    rec["seed"] = ep.seed;
    rec["hz"] = ep.control_hz;
    rec["T"] = ep.num_states();
    rec["state_dim"] = ep.state_dim;
    rec["action_dim"] = ep.action_dim;
    rec["segments"] = ep.planner_segments;
    rec["state_offset"] = write_block(ep.states);
    rec["action_offset"] = write_block(ep.actions);
    nlohmann::json views = nlohmann::json::array();
    for (const auto& v : ep.views) {
      nlohmann::json jv;
      jv["name"] = v.name;
      jv["dim"] = v.dim;
      jv["offset"] = write_block(v.data);
      jv["count"] = v.data.size();
      views.push_back(jv);
    }
    rec["views"] = views;
    man << rec.dump() << "\n";
  }
  if (!man || !blob) raise(ErrorKind::io_error, "short write under " + base);
  return out;
}

inline std::vector<Episode> read_dataset(const std::string& base, DatasetManifest* info = nullptr) {
  std::ifstream man(manifest_path(base), std::ios::binary);
  if (!man) raise(ErrorKind::io_error, "cannot read " + manifest_path(base));
  std::ifstream blob(blob_path(base), std::ios::binary);
  if (!blob) raise(ErrorKind::io_error, "cannot read " + blob_path(base));

  auto read_block = [&](std::uint64_t offset, std::size_t count) {
    std::vector<float> v(count);
    blob.seekg(static_cast<std::streamoff>(offset * sizeof(float)));
    blob.read(reinterpret_cast<char*>(v.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
    if (!blob) raise(ErrorKind::format_error, "blob read out of range in " + blob_path(base));
    return v;
  };

  std::vector<Episode> episodes;
  std::string line;
  int record = 0;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      raise(ErrorKind::format_error,
            "malformed manifest record " + std::to_string(record) + " in " + manifest_path(base));
    if (record == 0) {
      if (!j.contains("kind") || j["kind"] != "flowact-dataset")
        raise(ErrorKind::format_error, "record 0: not a dataset manifest header");
      if (info) {
        info->base_path = base;
        info->episode_count = j["episodes"].get<int>();
        if (j.contains("per_dataset_counts"))
          info->per_dataset_counts =
              j["per_dataset_counts"].get<std::map<std::string, int>>();
        if (j.contains("normalizer")) info->normalizer_ref = j["normalizer"].get<std::string>();
      }
      ++record;
      continue;
    }
    try {
      Episode ep;
      ep.id = j.at("id").get<std::string>();
      ep.dataset_id = j.at("dataset").get<std::string>();
      ep.family = j.at("family").get<std::string>();
      ep.embodiment_id = j.at("embodiment").get<std::string>();
      ep.instruction = j.at("instruction").get<std::string>();
      ep.seed = j.at("seed").get<std::uint64_t>();
      ep.control_hz = j.at("hz").get<double>();
      ep.state_dim = j.at("state_dim").get<int>();
      ep.action_dim = j.at("action_dim").get<int>();
      ep.planner_segments = j.value("segments", 0);
      const int T = j.at("T").get<int>();
      ep.states = read_block(j.at("state_offset").get<std::uint64_t>(),
                             static_cast<std::size_t>(T) * ep.state_dim);
      ep.actions = read_block(j.at("action_offset").get<std::uint64_t>(),
                              static_cast<std::size_t>(std::max(0, T - 1)) * ep.action_dim);
      for (const auto& jv : j.at("views")) {
        ViewTrack v;
        v.name = jv.at("name").get<std::string>();
        v.dim = jv.at("dim").get<int>();
        v.data = read_block(jv.at("offset").get<std::uint64_t>(),
                            jv.at("count").get<std::size_t>());
        ep.views.push_back(std::move(v));
      }
      episodes.push_back(std::move(ep));
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorKind::format_error, "manifest record " + std::to_string(record) + " in " +
                                         manifest_path(base) + ": " + e.what());
    }
    ++record;
  }
  return episodes;
}

}  // namespace flowact
