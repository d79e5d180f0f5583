#pragma once

#include <vector>

#include "flowact/common.hpp"
#include "flowact/sim.hpp"

namespace flowact {

// Recovers pseudo-actions from a proprioceptive state track via finite
// differences. The leading pose sub-vector of each row drives the result:
//   delta-eef:  a_t = pose_{t+1} - pose_t, grip channel = next setpoint
//   abs-joint:  a_t = joints_{t+1}, grip channel = next setpoint
//   waypoint:   (dx, dy, dtheta) with dtheta wrapped to (-pi, pi]
inline std::vector<std::vector<double>> derive_pseudo_actions(
    const std::vector<std::vector<double>>& states, ControlMode mode, const StateLayout& layout) {
  if (states.size() < 2)
    raise(ErrorKind::invalid_argument, "derive_pseudo_actions: need at least two states");
  const int T = static_cast<int>(states.size());
  const int d = layout.pose_dim + (layout.has_grip ? 1 : 0);
  std::vector<std::vector<double>> actions(T - 1, std::vector<double>(d, 0.0));
  for (int t = 0; t + 1 < T; ++t) {
    const auto& s0 = states[t];
    const auto& s1 = states[t + 1];
    switch (mode) {
      case ControlMode::delta_eef:
        for (int k = 0; k < layout.pose_dim; ++k) actions[t][k] = s1[k] - s0[k];
        actions[t][layout.pose_dim] = s1[layout.grip_index()];
        break;
      case ControlMode::abs_joint:
        for (int k = 0; k < layout.pose_dim; ++k) actions[t][k] = s1[k];
        actions[t][layout.pose_dim] = s1[layout.grip_index()];
        break;
      case ControlMode::waypoint:
        actions[t][0] = s1[0] - s0[0];
        actions[t][1] = s1[1] - s0[1];
        actions[t][2] = wrap_angle(s1[2] - s0[2]);
        break;
    }
  }
  return actions;
}

inline std::vector<std::vector<double>> derive_pseudo_actions(const Episode& ep) {
  const EmbodimentSpec& spec = embodiment(ep.embodiment_id);
  const StateLayout layout = state_layout(spec);
  std::vector<std::vector<double>> states(ep.num_states());
  for (int t = 0; t < ep.num_states(); ++t) {
    const float* row = ep.state_row(t);
    states[t].assign(row, row + ep.state_dim);
  }
  return derive_pseudo_actions(states, spec.control_mode, layout);
}

}  // namespace flowact
