#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowact/common.hpp"

namespace flowact {

// A named per-step observation track (e.g. an "ego" feature channel).
struct ViewTrack {
  std::string name;
  int dim = 0;
  std::vector<float> data;  // T x dim, row-major
};

// One recorded trajectory. Numeric payloads are float32 so that dataset
// serialization round-trips bit-exactly.
struct Episode {
  std::string id;
  std::string dataset_id;
  std::string embodiment_id;
  std::string family;
  std::string instruction;
  std::uint64_t seed = 0;
  double control_hz = 0.0;

  int state_dim = 0;
  int action_dim = 0;
  int planner_segments = 0;
  std::vector<float> states;   // T x state_dim
  std::vector<float> actions;  // (T-1) x action_dim when derived from states
  std::vector<ViewTrack> views;

  int num_states() const { return state_dim == 0 ? 0 : static_cast<int>(states.size()) / state_dim; }
  int num_actions() const { return action_dim == 0 ? 0 : static_cast<int>(actions.size()) / action_dim; }

  const float* state_row(int t) const { return &states[static_cast<std::size_t>(t) * state_dim]; }
  const float* action_row(int t) const { return &actions[static_cast<std::size_t>(t) * action_dim]; }
  float* state_row(int t) { return &states[static_cast<std::size_t>(t) * state_dim]; }
  float* action_row(int t) { return &actions[static_cast<std::size_t>(t) * action_dim]; }
};

}  // namespace flowact
