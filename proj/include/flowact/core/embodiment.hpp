#pragma once

#include <string>
#include <vector>

#include "flowact/common.hpp"

namespace flowact {

// Global caps of the unified chunk layout. H matches the SFT prediction
// horizon; K matches the widest per-step action considered (32 dims).
inline constexpr int kHorizon = 16;
inline constexpr int kChannelCap = 32;

enum class Arms { single, dual };
enum class ControlMode { delta_eef, abs_joint, waypoint };

inline const char* control_mode_name(ControlMode m) {
  switch (m) {
    case ControlMode::delta_eef: return "delta-eef";
    case ControlMode::abs_joint: return "abs-joint";
    case ControlMode::waypoint: return "waypoint";
  }
  return "?";
}

struct EmbodimentSpec {
  std::string robot_tag;
  Arms arms = Arms::single;
  bool has_waist = false;
  bool has_mobile_base = false;
  ControlMode control_mode = ControlMode::delta_eef;
  int native_dim = 0;       // d_i, count of real action channels
  double control_hz = 0.0;  // FPS in the embodiment prompt
  int default_horizon = kHorizon;

  void validate(int horizon_cap = kHorizon, int channel_cap = kChannelCap) const {
    if (native_dim < 1 || native_dim > channel_cap)
      raise(ErrorKind::invalid_argument,
            "embodiment " + robot_tag + ": native_dim out of range");
    if (default_horizon < 1 || default_horizon > horizon_cap)
      raise(ErrorKind::invalid_argument,
            "embodiment " + robot_tag + ": default_horizon out of range");
    if (control_mode == ControlMode::waypoint && native_dim != 3)
      raise(ErrorKind::invalid_argument,
            "embodiment " + robot_tag + ": waypoint mode requires 3 channels");
    if (control_hz <= 0.0)
      raise(ErrorKind::invalid_argument, "embodiment " + robot_tag + ": control_hz <= 0");
  }
};

// The four toy embodiments. Heterogeneous dims and control modes exercise
// the projection designs; the navigator predicts 8 waypoints per chunk.
inline const std::vector<EmbodimentSpec>& toy_embodiments() {
  static const std::vector<EmbodimentSpec> regs = [] {
    std::vector<EmbodimentSpec> v;
    v.push_back({"point-gripper", Arms::single, false, false, ControlMode::delta_eef, 5, 50.0, 16});
    v.push_back({"planar-arm-2dof", Arms::single, false, false, ControlMode::abs_joint, 3, 50.0, 16});
    v.push_back({"planar-arm-3dof", Arms::single, false, false, ControlMode::abs_joint, 4, 50.0, 16});
    v.push_back({"planar-navigator", Arms::single, false, true, ControlMode::waypoint, 3, 2.0, 8});
    for (const auto& e : v) e.validate();
    return v;
  }();
  return regs;
}

inline const EmbodimentSpec& embodiment(const std::string& tag) {
  for (const auto& e : toy_embodiments())
    if (e.robot_tag == tag) return e;
  raise(ErrorKind::invalid_argument, "unknown embodiment: " + tag);
}

inline bool embodiment_known(const std::string& tag) {
  for (const auto& e : toy_embodiments())
    if (e.robot_tag == tag) return true;
  return false;
}

}  // namespace flowact
