#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "flowact/envs/wire.hpp"

namespace flowact {

// Hosts environments behind the length-prefixed JSON protocol. Sessions are
// fully isolated: each owns its env instance; a registry mutex guards the
// session table, a per-session mutex guards stepping.
class EnvServer {
 public:
  EnvServer(std::map<std::string, EnvSpec> registry, std::map<std::string, NormalizerStats> stats,
            const Vocabulary& vocab)
      : registry_(std::move(registry)), stats_(std::move(stats)), vocab_(&vocab) {}

  ~EnvServer() { stop(); }

  void start(int port = 0) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) raise(ErrorKind::transport_error, "socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
      raise(ErrorKind::transport_error, "bind failed");
    if (::listen(listen_fd_, 256) != 0) raise(ErrorKind::transport_error, "listen failed");
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  int port() const { return port_; }

  void stop() {
    if (!running_.exchange(false)) return;
    if (listen_fd_ >= 0) {
      ::shutdown(listen_fd_, SHUT_RDWR);
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> workers;
    {
      std::lock_guard<std::mutex> lk(conn_mutex_);
      workers.swap(conn_threads_);
    }
    for (auto& t : workers)
      if (t.joinable()) t.join();
  }

 private:
  struct Session {
    std::unique_ptr<ToyEnv> env;
    std::mutex mutex;
  };

  void accept_loop() {
    while (running_) {
      sockaddr_in peer{};
      socklen_t len = sizeof(peer);
      int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
      if (fd < 0) {
        if (!running_) break;
        continue;
      }
      std::lock_guard<std::mutex> lk(conn_mutex_);
      conn_threads_.emplace_back([this, fd] { serve_connection(fd); });
    }
  }

  void serve_connection(int fd) {
    std::string payload;
    while (running_) {
      try {
        if (!recv_frame(fd, payload, 200)) break;  // clean EOF
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::transport_error && std::string(e.what()) == "recv timeout")
          continue;  // idle tick, check running_
        break;
      }
      std::string reply = handle(payload);
      try {
        send_frame(fd, reply);
      } catch (const Error&) {
        break;
      }
    }
    ::close(fd);
  }

  std::string handle(const std::string& payload) {
    nlohmann::json req = nlohmann::json::parse(payload, nullptr, false);
    if (req.is_discarded() || !req.contains("cmd"))
      return error_reply(ErrorKind::protocol_error,
                         "malformed message: " + payload.substr(0, 128));
    try {
      const std::string cmd = req["cmd"].get<std::string>();
      if (cmd == "reset") return handle_reset(req);
      if (cmd == "step") return handle_step(req);
      if (cmd == "close") return handle_close(req);
      return error_reply(ErrorKind::protocol_error, "unknown cmd: " + cmd);
    } catch (const Error& e) {
      return error_reply(e.kind(), e.what());
    } catch (const std::exception& e) {
      return error_reply(ErrorKind::protocol_error, e.what());
    }
  }

  std::string error_reply(ErrorKind kind, const std::string& detail) {
    nlohmann::json j;
    j["error"] = {{"kind", error_kind_name(kind)}, {"detail", detail}};
    return j.dump();
  }

  std::string handle_reset(const nlohmann::json& req) {
    const std::string spec_id = req.at("spec_id").get<std::string>();
    const std::uint64_t seed = req.at("seed").get<std::uint64_t>();
    auto rit = registry_.find(spec_id);
    if (rit == registry_.end())
      raise(ErrorKind::protocol_error, "unknown spec_id: " + spec_id);
    auto sit = stats_.find(spec_id);
    if (sit == stats_.end()) raise(ErrorKind::protocol_error, "no stats for: " + spec_id);

    auto session = std::make_shared<Session>();
    session->env = std::make_unique<ToyEnv>(rit->second, sit->second, *vocab_);
    auto [state, cond] = session->env->reset(seed);

    int id;
    {
      std::lock_guard<std::mutex> lk(sessions_mutex_);
      id = next_session_++;
      sessions_[id] = session;
    }
    const EmbodimentSpec& es = embodiment(rit->second.embodiment_id);
    nlohmann::json j;
    j["session"] = id;
    j["state"] = state_to_json(state);
    j["prompt"] = detokenize(cond.prompt_tokens, *vocab_);
    j["embodiment"] = rit->second.embodiment_id;
    j["h_task"] = es.default_horizon;
    j["native_dim"] = es.native_dim;
    j["obs"] = wire_array(cond.obs[0].features);
    j["obs_rows"] = cond.obs[0].features.rows;
    j["obs_cols"] = cond.obs[0].features.cols;
    return j.dump();
  }

  std::shared_ptr<Session> find_session(int id) {
    std::lock_guard<std::mutex> lk(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end())
      raise(ErrorKind::protocol_error, "unknown session: " + std::to_string(id));
    return it->second;
  }

  std::string handle_step(const nlohmann::json& req) {
    auto session = find_session(req.at("session").get<int>());
    std::lock_guard<std::mutex> lk(session->mutex);
    ToyEnv& env = *session->env;
    const EmbodimentSpec& es = embodiment(env.env_spec().embodiment_id);

    const auto& action = req.at("action");
    if (!action.is_array() || action.empty() || action.size() % es.native_dim != 0)
      raise(ErrorKind::protocol_error,
            "action length " + std::to_string(action.size()) + " not a multiple of native dim " +
                std::to_string(es.native_dim));
    const int steps = static_cast<int>(action.size()) / es.native_dim;
    if (steps > kHorizon) raise(ErrorKind::protocol_error, "action exceeds the chunk horizon");

    ActionChunk chunk;
    chunk.c = es.native_dim;
    chunk.H_task = steps;
    chunk.embodiment_id = env.env_spec().embodiment_id;
    chunk.mask = build_mask(chunk.c, steps);
    chunk.values = Tensor::zeros(kHorizon, kChannelCap);
    for (int h = 0; h < steps; ++h)
      for (int k = 0; k < es.native_dim; ++k)
        chunk.values.at(h, k) = action[static_cast<std::size_t>(h) * es.native_dim + k].get<double>();

    auto r = env.step(chunk);
    nlohmann::json j;
    j["state"] = state_to_json(r.state);
    j["reward"] = r.reward;
    j["done"] = r.done;
    if (!r.done) {
      auto cond = env.conditioning();
      j["obs"] = wire_array(cond.obs[0].features);
      j["obs_rows"] = cond.obs[0].features.rows;
      j["obs_cols"] = cond.obs[0].features.cols;
    }
    return j.dump();
  }

  std::string handle_close(const nlohmann::json& req) {
    int id = req.at("session").get<int>();
    std::lock_guard<std::mutex> lk(sessions_mutex_);
    if (!sessions_.erase(id))
      raise(ErrorKind::protocol_error, "unknown session: " + std::to_string(id));
    nlohmann::json j;
    j["closed"] = true;
    return j.dump();
  }

  std::map<std::string, EnvSpec> registry_;
  std::map<std::string, NormalizerStats> stats_;
  const Vocabulary* vocab_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex conn_mutex_;
  std::vector<std::thread> conn_threads_;
  std::mutex sessions_mutex_;
  std::map<int, std::shared_ptr<Session>> sessions_;
  int next_session_ = 1;
};

}  // namespace flowact
