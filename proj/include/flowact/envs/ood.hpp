#pragma once

#include <string>

#include "flowact/envs/env.hpp"

namespace flowact {

// Derives an out-of-distribution variant from a training spec.
//   position-shift:        object sampling band disjoint from training band
//   instruction-paraphrase: held-out grammar productions only
//   reversed-binding:      the two color-bound object roles swap colors
//   background-noise:      observation feature noise raised to the OOD level
inline EnvSpec make_ood_variant(const EnvSpec& spec, const std::string& tag) {
  EnvSpec out = spec;
  out.spec_id = spec.spec_id + "+" + tag;
  out.ood_tags.insert(tag);
  const EmbodimentSpec& es = embodiment(spec.embodiment_id);

  if (tag == "position-shift") {
    if (es.control_mode == ControlMode::abs_joint)
      raise(ErrorKind::invalid_argument,
            "position-shift: arm embodiments sample an annulus, not a band");
    out.sampler.band_outside = true;
    return out;
  }
  if (tag == "instruction-paraphrase") {
    out.sampler.production_set = ProductionSet::holdout;
    return out;
  }
  if (tag == "reversed-binding") {
    bool two_object = spec.family == TemplateFamily::pick_place ||
                      spec.family == TemplateFamily::rotate_reposition ||
                      spec.family == TemplateFamily::swap;
    if (!two_object)
      raise(ErrorKind::invalid_argument, "reversed-binding: needs a two-object family");
    if (spec.sampler.forced_obj_color.empty() || spec.sampler.forced_dst_color.empty())
      raise(ErrorKind::invalid_argument,
            "reversed-binding: training spec does not pin the color binding");
    out.sampler.forced_obj_color = spec.sampler.forced_dst_color;
    out.sampler.forced_dst_color = spec.sampler.forced_obj_color;
    return out;
  }
  if (tag == "background-noise") {
    out.feature_noise_std = std::max(0.05, spec.feature_noise_std * 5.0);
    return out;
  }
  raise(ErrorKind::invalid_argument, "unknown ood tag: " + tag);
}

}  // namespace flowact
