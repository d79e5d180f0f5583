#pragma once

#include <vector>

#include "flowact/common.hpp"

namespace flowact {

// Generalized advantage estimation over one chunk-level sequence with a zero
// terminal bootstrap:
//   delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t
//   A_t     = delta_t + gamma lambda (1 - done_t) A_{t+1}
inline void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                        const std::vector<bool>& dones, double gamma, double lambda,
                        std::vector<double>& advantages, std::vector<double>& returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    raise(ErrorKind::invalid_argument, "compute_gae: length mismatch");
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    double not_done = dones[i] ? 0.0 : 1.0;
    double v_next = (i + 1 < n) ? values[i + 1] : 0.0;
    double delta = rewards[i] + gamma * v_next * not_done - values[i];
    acc = delta + gamma * lambda * not_done * acc;
    advantages[i] = acc;
    returns[i] = acc + values[i];
  }
}

}  // namespace flowact
