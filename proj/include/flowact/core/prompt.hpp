#pragma once

#include <string>

#include "flowact/common.hpp"
#include "flowact/core/embodiment.hpp"

namespace flowact {

// Renders the embodiment preamble. Byte-deterministic, single canonical
// spacing; FPS and chunk size are printed as integers.
inline std::string render_embodiment_prompt(const EmbodimentSpec& spec,
                                            const std::string& instruction,
                                            int chunk_size) {
  if (instruction.empty())
    raise(ErrorKind::invalid_argument, "render_embodiment_prompt: empty instruction");
  std::string s = "The robot is " + spec.robot_tag + " with ";
  s += (spec.arms == Arms::single) ? "single arm" : "dual arms";
  if (spec.has_waist) s += ", waist";
  if (spec.has_mobile_base) s += ", and mobile base";
  s += ". The control frequency is " + std::to_string(static_cast<int>(spec.control_hz)) +
       " Hz. Please predict the next " + std::to_string(chunk_size) +
       " control actions to execute the following task: " + instruction + ".";
  return s;
}

}  // namespace flowact
