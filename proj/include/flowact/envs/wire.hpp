#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowact/common.hpp"
#include "flowact/envs/env.hpp"

namespace flowact {

// Numeric wire format: decimal with 9 significant digits, which round-trips
// any float32 exactly.
inline double wire9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

inline nlohmann::json wire_array(const std::vector<float>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (float x : v) a.push_back(wire9(x));
  return a;
}

inline nlohmann::json wire_array(const Tensor& t) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : t.data) a.push_back(wire9(to_f32(x)));
  return a;
}

inline nlohmann::json state_to_json(const EnvState& s) {
  nlohmann::json j;
  j["row"] = wire_array(s.state_row);
  j["elapsed"] = s.elapsed;
  j["done"] = s.done;
  j["success"] = s.success;
  return j;
}

inline EnvState state_from_json(const nlohmann::json& j) {
  EnvState s;
  for (const auto& v : j.at("row")) s.state_row.push_back(static_cast<float>(v.get<double>()));
  s.elapsed = j.at("elapsed").get<int>();
  s.done = j.at("done").get<bool>();
  s.success = j.at("success").get<bool>();
  return s;
}

// ---- length-prefixed framing (4-byte big-endian) ---------------------------

inline void send_frame(int fd, const std::string& payload) {
  std::uint32_t n = htonl(static_cast<std::uint32_t>(payload.size()));
  std::string buf(reinterpret_cast<const char*>(&n), 4);
  buf += payload;
  std::size_t sent = 0;
  while (sent < buf.size()) {
    ssize_t k = ::send(fd, buf.data() + sent, buf.size() - sent, MSG_NOSIGNAL);
    if (k <= 0) raise(ErrorKind::transport_error, "send failed");
    sent += static_cast<std::size_t>(k);
  }
}

// Returns false on clean EOF before any byte of a frame.
inline bool recv_exact(int fd, char* out, std::size_t n, int timeout_ms, bool* eof_ok) {
  std::size_t got = 0;
  while (got < n) {
    pollfd p{fd, POLLIN, 0};
    int pr = ::poll(&p, 1, timeout_ms);
    if (pr == 0) raise(ErrorKind::transport_error, "recv timeout");
    if (pr < 0) raise(ErrorKind::transport_error, "poll failed");
    ssize_t k = ::recv(fd, out + got, n - got, 0);
    if (k == 0) {
      if (got == 0 && eof_ok) {
        *eof_ok = true;
        return false;
      }
      raise(ErrorKind::transport_error, "connection closed mid-frame");
    }
    if (k < 0) raise(ErrorKind::transport_error, "recv failed");
    got += static_cast<std::size_t>(k);
  }
  return true;
}

// Empty optional-style return: false means clean shutdown.
inline bool recv_frame(int fd, std::string& out, int timeout_ms) {
  char hdr[4];
  bool eof = false;
  if (!recv_exact(fd, hdr, 4, timeout_ms, &eof)) return false;
  std::uint32_t n;
  std::memcpy(&n, hdr, 4);
  n = ntohl(n);
  if (n > (64u << 20)) raise(ErrorKind::protocol_error, "oversized frame");
  out.resize(n);
  if (n > 0) recv_exact(fd, out.data(), n, timeout_ms, nullptr);
  return true;
}

inline ErrorKind error_kind_from_name(const std::string& s) {
  for (ErrorKind k : {ErrorKind::invalid_argument, ErrorKind::data_error, ErrorKind::config_error,
                      ErrorKind::numeric_error, ErrorKind::format_error, ErrorKind::protocol_error,
                      ErrorKind::transport_error, ErrorKind::planning_failure,
                      ErrorKind::insufficient_data, ErrorKind::io_error})
    if (s == error_kind_name(k)) return k;
  return ErrorKind::protocol_error;
}

}  // namespace flowact
