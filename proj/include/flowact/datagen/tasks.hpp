#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flowact/rng.hpp"
#include "flowact/sim.hpp"
#include "flowact/text/grammar.hpp"

namespace flowact {

inline bool family_supported(TemplateFamily f, const EmbodimentSpec& spec) {
  if (f == TemplateFamily::scene_caption) return false;
  if (spec.control_mode == ControlMode::waypoint) return f == TemplateFamily::rotate_to_view;
  if (spec.robot_tag == "planar-arm-2dof") {
    // effector yaw is position-coupled on a 2-DoF arm: no rotation targets
    return f == TemplateFamily::pick_place || f == TemplateFamily::push ||
           f == TemplateFamily::pull || f == TemplateFamily::swap;
  }
  return true;
}

struct TaskSamplerOptions {
  ProductionSet production_set = ProductionSet::train;
  double band_lo = 0.2;
  double band_hi = 0.8;
  bool band_outside = false;  // position-shift variant: sample outside the band
  std::string forced_obj_color;
  std::string forced_dst_color;
  int max_tries = 500;
};

namespace detail {

inline constexpr double kMinSeparation = 0.12;
inline constexpr double kHoverZ = 0.15;

struct SampleGeometry {
  bool is_arm = false;
  ArmGeometry arm;
  double radius_lo = 0.0, radius_hi = 0.0;
  Workspace workspace;
};

inline SampleGeometry sample_geometry(const EmbodimentSpec& spec) {
  SampleGeometry g;
  g.workspace = Workspace{0.0, 1.0, 0.0, 1.0};
  if (spec.control_mode == ControlMode::abs_joint) {
    g.is_arm = true;
    g.arm = arm_geometry(spec.robot_tag);
    g.radius_lo = 0.17;
    g.radius_hi = g.arm.reach_max() - 0.04;
  }
  return g;
}

inline bool arm_reachable(const EmbodimentSpec& spec, const SampleGeometry& g, double x, double y,
                          double yaw, bool with_yaw) {
  std::vector<double> joints;
  if (spec.robot_tag == "planar-arm-2dof") return arm_ik_2dof(g.arm, x, y, joints);
  if (with_yaw) return arm_ik_3dof(g.arm, x, y, yaw, joints);
  double pointing = std::atan2(y - g.arm.base_y, x - g.arm.base_x);
  return arm_ik_3dof(g.arm, x, y, pointing, joints);
}

inline bool sample_position(Rng& rng, const EmbodimentSpec& spec, const SampleGeometry& g,
                            const TaskSamplerOptions& opt, double& x, double& y) {
  for (int tries = 0; tries < 64; ++tries) {
    if (g.is_arm) {
      double r = rng.uniform(g.radius_lo, g.radius_hi);
      double a = rng.uniform(0.25, M_PI - 0.25);  // keep above the base line
      x = g.arm.base_x + r * std::cos(a);
      y = g.arm.base_y + r * std::sin(a);
      if (y < 0.12 || !g.workspace.contains(x, y, 0.02)) continue;
      if (!arm_reachable(spec, g, x, y, 0.0, false)) continue;
      return true;
    }
    if (opt.band_outside) {
      x = rng.uniform(0.05, 0.95);
      y = rng.uniform(0.05, 0.95);
      bool inside_band = x >= opt.band_lo && x <= opt.band_hi && y >= opt.band_lo && y <= opt.band_hi;
      if (inside_band) continue;
      return true;
    }
    x = rng.uniform(opt.band_lo, opt.band_hi);
    y = rng.uniform(opt.band_lo, opt.band_hi);
    return true;
  }
  return false;
}

inline bool far_from_all(const Scene& scene, double x, double y, double min_sep) {
  for (const auto& o : scene.objects)
    if (std::hypot(o.x - x, o.y - y) < min_sep) return false;
  return true;
}

}  // namespace detail

// Rejection-samples a task whose start and goal poses are inside the
// embodiment's reachable set with a minimum spatial separation.
inline TaskInstance sample_task_instance(TemplateFamily family, const std::string& embodiment_id,
                                         std::uint64_t seed, const Vocabulary& vocab,
                                         const TaskSamplerOptions& opt = {}) {
  const EmbodimentSpec& spec = embodiment(embodiment_id);
  if (!family_supported(family, spec))
    raise(ErrorKind::invalid_argument, std::string("family ") + family_name(family) +
                                           " not supported on " + embodiment_id);
  auto geom = detail::sample_geometry(spec);
  Rng rng(derive_seed(seed, "task", static_cast<std::uint64_t>(family),
                      fnv1a64(embodiment_id)));

  for (int attempt = 0; attempt < opt.max_tries; ++attempt) {
    TaskInstance inst;
    inst.family = family;
    inst.embodiment_id = embodiment_id;
    inst.workspace = geom.workspace;
    inst.seed = seed;

    auto pick_color = [&](const std::string& forced, const std::string& avoid) {
      if (!forced.empty()) return forced;
      for (int t = 0; t < 16; ++t) {
        const auto& c = color_names()[rng.uniform_index(color_names().size())];
        if (c != avoid) return c;
      }
      return color_names()[0];
    };

    // --- scene objects -----------------------------------------------------
    double ox = 0, oy = 0;
    std::map<std::string, std::string> slots;
    bool ok = true;

    if (spec.control_mode == ControlMode::waypoint) {
      // navigator: no scene objects; absolute heading target
      inst.view_target = view_target_names()[rng.uniform_index(view_target_names().size())];
      inst.goal_yaw = view_target_angle(inst.view_target);
      double sx = rng.uniform(opt.band_lo, opt.band_hi);
      double sy = rng.uniform(opt.band_lo, opt.band_hi);
      if (opt.band_outside) {
        if (!detail::sample_position(rng, spec, geom, opt, sx, sy)) continue;
      }
      double theta0 = rng.uniform(-M_PI + 1e-3, M_PI);
      if (std::abs(wrap_angle(inst.goal_yaw - theta0)) < 0.3) continue;
      inst.start_pose = {sx, sy, theta0};
      slots["obj"] = "robot";
      slots["target"] = inst.view_target;
      inst.instruction =
          compose_instruction(family, slots, derive_seed(seed, "instr"), vocab, opt.production_set);
      return inst;
    }

    // primary object
    if (!detail::sample_position(rng, spec, geom, opt, ox, oy)) continue;
    SceneObject obj;
    obj.name = object_names()[rng.uniform_index(object_names().size())];
    obj.color = pick_color(opt.forced_obj_color, "");
    obj.x = ox;
    obj.y = oy;
    obj.yaw = rng.uniform(-1.2, 1.2);
    inst.scene_init.objects.push_back(obj);
    inst.obj_index = 0;
    slots["obj"] = obj.name;
    slots["obj_color"] = obj.color;

    switch (family) {
      case TemplateFamily::pick_place:
      case TemplateFamily::rotate_reposition: {
        double dx = 0, dy = 0;
        bool placed = false;
        for (int t = 0; t < 64 && !placed; ++t) {
          if (!detail::sample_position(rng, spec, geom, opt, dx, dy)) break;
          placed = detail::far_from_all(inst.scene_init, dx, dy, detail::kMinSeparation);
        }
        if (!placed) { ok = false; break; }
        SceneObject dst;
        dst.name = container_names()[rng.uniform_index(container_names().size())];
        dst.color = pick_color(opt.forced_dst_color, obj.color);
        dst.x = dx;
        dst.y = dy;
        inst.scene_init.objects.push_back(dst);
        inst.dst_index = 1;
        inst.goal_x = dx;
        inst.goal_y = dy;
        slots["dst"] = dst.name;
        slots["dst_color"] = dst.color;
        if (family == TemplateFamily::rotate_reposition) {
          // joint-space rotation range stays inside the wrist coverage the
          // corpus can normalize
          double hi_delta = geom.is_arm ? 1.0 : 2.0;
          double lo_delta = geom.is_arm ? 0.4 : 0.5;
          double delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo_delta, hi_delta);
          inst.goal_yaw = wrap_angle(obj.yaw + delta);
          if (geom.is_arm) {
            // both grasp and goal effector yaws must be reachable
            double grasp_yaw = std::atan2(oy - geom.arm.base_y, ox - geom.arm.base_x);
            std::vector<double> j;
            if (!arm_ik_3dof(geom.arm, ox, oy, grasp_yaw, j) ||
                !arm_ik_3dof(geom.arm, dx, dy, grasp_yaw + delta, j)) {
              ok = false;
            }
          }
        } else if (geom.is_arm && !detail::arm_reachable(spec, geom, dx, dy, 0.0, false)) {
          ok = false;  // plain pick-place transports with pointing yaw
        }
        break;
      }
      case TemplateFamily::push:
      case TemplateFamily::pull: {
        std::string dir = family == TemplateFamily::pull
                              ? "front"
                              : direction_names()[rng.uniform_index(direction_names().size())];
        double ang = direction_angle(dir);
        double dist = rng.uniform(0.12, 0.25);
        double gx = ox + dist * std::cos(ang);
        double gy = oy + dist * std::sin(ang);
        if (!geom.workspace.contains(gx, gy, 0.04)) { ok = false; break; }
        if (geom.is_arm && !detail::arm_reachable(spec, geom, gx, gy, 0.0, false)) { ok = false; break; }
        if (geom.is_arm && gy < 0.12) { ok = false; break; }
        inst.direction = dir;
        inst.goal_x = gx;
        inst.goal_y = gy;
        if (family == TemplateFamily::push) slots["dir"] = dir;
        break;
      }
      case TemplateFamily::rotate_to_view: {
        inst.view_target = view_target_names()[rng.uniform_index(view_target_names().size())];
        inst.goal_yaw = view_target_angle(inst.view_target);
        double rot = std::abs(wrap_angle(inst.goal_yaw - obj.yaw));
        if (rot < 0.3) { ok = false; break; }
        if (geom.is_arm && rot > 1.2) { ok = false; break; }
        slots["target"] = inst.view_target;
        if (geom.is_arm) {
          double grasp_yaw = std::atan2(oy - geom.arm.base_y, ox - geom.arm.base_x);
          double delta = wrap_angle(inst.goal_yaw - obj.yaw);
          std::vector<double> j;
          if (!arm_ik_3dof(geom.arm, ox, oy, grasp_yaw, j) ||
              !arm_ik_3dof(geom.arm, ox, oy, grasp_yaw + delta, j))
            ok = false;
        }
        inst.goal_x = ox;
        inst.goal_y = oy;
        break;
      }
      case TemplateFamily::swap: {
        double bx = 0, by = 0;
        bool placed = false;
        for (int t = 0; t < 64 && !placed; ++t) {
          if (!detail::sample_position(rng, spec, geom, opt, bx, by)) break;
          placed = detail::far_from_all(inst.scene_init, bx, by, detail::kMinSeparation);
        }
        if (!placed) { ok = false; break; }
        SceneObject b;
        for (int t = 0; t < 16; ++t) {
          b.name = object_names()[rng.uniform_index(object_names().size())];
          if (b.name != obj.name) break;
        }
        b.color = pick_color("", obj.color);
        b.x = bx;
        b.y = by;
        b.yaw = rng.uniform(-1.2, 1.2);
        inst.scene_init.objects.push_back(b);
        inst.obj_b_index = 1;
        slots.erase("obj");
        slots.erase("obj_color");
        slots["obj_a"] = obj.name;
        slots["obj_a_color"] = obj.color;
        slots["obj_b"] = b.name;
        slots["obj_b_color"] = b.color;
        break;
      }
      default:
        ok = false;
    }
    if (!ok) continue;

    // --- effector start ------------------------------------------------------
    if (spec.control_mode == ControlMode::delta_eef) {
      double sx = rng.uniform(opt.band_lo, opt.band_hi);
      double sy = rng.uniform(opt.band_lo, opt.band_hi);
      inst.start_pose = {sx, sy, detail::kHoverZ, rng.uniform(-0.3, 0.3), 0.0};
    } else {
      double hx = 0, hy = 0;
      if (!detail::sample_position(rng, spec, geom, TaskSamplerOptions{}, hx, hy)) continue;
      std::vector<double> joints;
      bool got = spec.robot_tag == "planar-arm-2dof"
                     ? arm_ik_2dof(geom.arm, hx, hy, joints)
                     : arm_ik_3dof(geom.arm, hx, hy,
                                   std::atan2(hy - geom.arm.base_y, hx - geom.arm.base_x), joints);
      if (!got) continue;
      inst.start_pose = joints;
      inst.start_pose.push_back(0.0);  // grip open
    }

    inst.instruction =
        compose_instruction(family, slots, derive_seed(seed, "instr"), vocab, opt.production_set);
    return inst;
  }
  raise(ErrorKind::planning_failure,
        std::string("sample_task_instance: no feasible instance for ") + family_name(family) +
            " on " + embodiment_id);
}

}  // namespace flowact
