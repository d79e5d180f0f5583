#pragma once

#include <string>

#include "flowact/envs/wire.hpp"

namespace flowact {

// Client-side handle to a served environment. Observationally equivalent to
// the local ToyEnv under identical seeds; server errors surface as typed
// exceptions, never as fabricated transitions.
class RemoteEnv {
 public:
  RemoteEnv(const std::string& host, int port, const Vocabulary& vocab, int timeout_ms = 10000)
      : vocab_(&vocab), timeout_ms_(timeout_ms) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) raise(ErrorKind::transport_error, "socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
      raise(ErrorKind::transport_error, "bad host address: " + host);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd_);
      fd_ = -1;
      raise(ErrorKind::transport_error, "connect failed to " + host + ":" + std::to_string(port));
    }
  }

  ~RemoteEnv() {
    if (fd_ >= 0) ::close(fd_);
  }

  RemoteEnv(const RemoteEnv&) = delete;
  RemoteEnv& operator=(const RemoteEnv&) = delete;

  std::pair<EnvState, Conditioning> reset(const std::string& spec_id, std::uint64_t seed) {
    nlohmann::json req;
    req["cmd"] = "reset";
    req["spec_id"] = spec_id;
    req["seed"] = seed;
    auto resp = roundtrip(req);
    session_ = resp.at("session").get<int>();
    embodiment_id_ = resp.at("embodiment").get<std::string>();
    prompt_tokens_ = tokenize(resp.at("prompt").get<std::string>(), *vocab_);
    last_obs_ = read_obs(resp);
    has_obs_ = true;
    return {state_from_json(resp.at("state")), conditioning()};
  }

  struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool done = false;
  };

  StepResult step(const ActionChunk& chunk) {
    if (session_ < 0) raise(ErrorKind::protocol_error, "step before reset");
    nlohmann::json req;
    req["cmd"] = "step";
    req["session"] = session_;
    nlohmann::json action = nlohmann::json::array();
    for (int h = 0; h < chunk.H_task; ++h)
      for (int k = 0; k < chunk.c; ++k) action.push_back(wire9(to_f32(chunk.values.at(h, k))));
    req["action"] = action;
    auto resp = roundtrip(req);
    StepResult r;
    r.state = state_from_json(resp.at("state"));
    r.reward = resp.at("reward").get<double>();
    r.done = resp.at("done").get<bool>();
    if (resp.contains("obs")) {
      last_obs_ = read_obs(resp);
      has_obs_ = true;
    } else {
      has_obs_ = false;
    }
    return r;
  }

  void close_session() {
    if (session_ < 0) return;
    nlohmann::json req;
    req["cmd"] = "close";
    req["session"] = session_;
    roundtrip(req);
    session_ = -1;
  }

  Conditioning conditioning() const {
    if (!has_obs_) raise(ErrorKind::protocol_error, "no pending observation");
    Conditioning c;
    c.embodiment_id = embodiment_id_;
    c.prompt_tokens = prompt_tokens_;
    c.obs.push_back({"ego", last_obs_});
    return c;
  }

 private:
  Tensor read_obs(const nlohmann::json& resp) {
    Tensor t(resp.at("obs_rows").get<int>(), resp.at("obs_cols").get<int>());
    const auto& arr = resp.at("obs");
    for (std::size_t i = 0; i < arr.size(); ++i) t.data[i] = to_f32(arr[i].get<double>());
    return t;
  }

  nlohmann::json roundtrip(const nlohmann::json& req) {
    send_frame(fd_, req.dump());
    std::string payload;
    if (!recv_frame(fd_, payload, timeout_ms_))
      raise(ErrorKind::transport_error, "server closed the connection");
    nlohmann::json resp = nlohmann::json::parse(payload, nullptr, false);
    if (resp.is_discarded()) raise(ErrorKind::protocol_error, "unparseable server reply");
    if (resp.contains("error")) {
      const auto& e = resp["error"];
      raise(error_kind_from_name(e.value("kind", "protocol-error")),
            "server: " + e.value("detail", std::string("unknown")));
    }
    return resp;
  }

  const Vocabulary* vocab_;
  int timeout_ms_;
  int fd_ = -1;
  int session_ = -1;
  std::string embodiment_id_;
  std::vector<int> prompt_tokens_;
  Tensor last_obs_;
  bool has_obs_ = false;
};

}  // namespace flowact
