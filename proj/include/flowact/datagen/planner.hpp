#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "flowact/datagen/quintic.hpp"
#include "flowact/datagen/tasks.hpp"
#include "flowact/episode.hpp"
#include "flowact/sim.hpp"

namespace flowact {

struct PlannerOptions {
  // "real" corpus profile: jittered intermediate keyframes and wider
  // duration spread, standing in for teleoperation data
  bool real_profile = false;
  std::string dataset_id;
};

namespace detail {

struct Keyframe {
  std::vector<double> pose;  // control-space pose (eef pose / joints / nav pose)
  double grip = 0.0;
  int frames = 0;  // sample count of the segment ending at this keyframe
};

// Quintic time-scaled interpolation through keyframes; returns pose rows and
// grip per frame. Grip takes the incoming keyframe's value for the whole
// segment, so toggles happen at segment starts (dwell segments).
inline void sample_track(const std::vector<Keyframe>& keys, std::vector<std::vector<double>>& poses,
                         std::vector<double>& grips) {
  poses.clear();
  grips.clear();
  poses.push_back(keys[0].pose);
  grips.push_back(keys[0].grip);
  for (std::size_t s = 1; s < keys.size(); ++s) {
    const auto& a = keys[s - 1].pose;
    const auto& b = keys[s].pose;
    const int n = keys[s].frames;
    for (int i = 1; i <= n; ++i) {
      double u = static_cast<double>(i) / n;
      double w = quintic_s(u);
      std::vector<double> p(a.size());
      for (std::size_t d = 0; d < a.size(); ++d) p[d] = a[d] + w * (b[d] - a[d]);
      poses.push_back(std::move(p));
      grips.push_back(keys[s].grip);
    }
  }
}

// Control-space distance driving the segment duration.
inline double pose_distance(const std::vector<double>& a, const std::vector<double>& b,
                            ControlMode mode) {
  switch (mode) {
    case ControlMode::delta_eef: {
      double d2 = 0;
      for (int i = 0; i < 3; ++i) d2 += (b[i] - a[i]) * (b[i] - a[i]);
      return std::sqrt(d2) + 1.0 * std::abs(b[3] - a[3]);
    }
    case ControlMode::abs_joint: {
      double d2 = 0;
      for (std::size_t i = 0; i < a.size(); ++i) d2 += (b[i] - a[i]) * (b[i] - a[i]);
      return std::sqrt(d2);
    }
    case ControlMode::waypoint:
      return std::hypot(b[0] - a[0], b[1] - a[1]) + 0.5 * std::abs(b[2] - a[2]);
  }
  return 0.0;
}

// Frame count proportional to distance at a sampled cruise speed, so the
// per-frame action magnitudes stay inside the corpus quantile band instead
// of being crushed by normalization clipping.
inline int seg_frames(Rng& rng, double hz, ControlMode mode, double dist, bool real) {
  // One cruise speed per control mode. A narrow speed distribution keeps the
  // per-frame action magnitudes tightly clustered, so quantile clipping only
  // shaves the last sliver below the quintic peak.
  double speed, min_frames;
  switch (mode) {
    case ControlMode::delta_eef: speed = 0.30; min_frames = 12; break;
    case ControlMode::abs_joint: speed = 0.95; min_frames = 12; break;
    case ControlMode::waypoint: speed = 0.20; min_frames = 2; break;
  }
  if (real) speed *= rng.uniform(0.93, 1.07);  // teleoperation pace wobble
  int n = static_cast<int>(std::lround(hz * dist / speed));
  return std::max(static_cast<int>(min_frames), std::min(400, n));
}

inline int dwell_frames(Rng& rng, double hz) {
  if (hz <= 2.0) return 2;
  return 4 + static_cast<int>(rng.uniform_index(5));
}

inline void jitter(std::vector<double>& pose, Rng& rng, double sigma, int dims) {
  for (int d = 0; d < dims && d < static_cast<int>(pose.size()); ++d)
    pose[d] += rng.normal(0.0, sigma);
}

}  // namespace detail

// Plans a smooth 50 Hz trajectory through the family's canonical waypoints
// and replays it through the kinematic world, so the emitted episode is
// executable and ends in a successful state by construction.
inline Episode plan_trajectory(const TaskInstance& inst, const Vocabulary& vocab,
                               const PlannerOptions& opts = {}) {
  const EmbodimentSpec& spec = embodiment(inst.embodiment_id);
  const StateLayout layout = state_layout(spec);
  Rng rng(derive_seed(inst.seed, "planner", static_cast<std::uint64_t>(inst.family),
                      fnv1a64(inst.embodiment_id)));

  using detail::Keyframe;
  std::vector<Keyframe> keys;
  auto push = [&](std::vector<double> pose, double grip, int frames) {
    keys.push_back({std::move(pose), grip, frames});
  };
  auto seg = [&] { return -1; };  // distance-proportional, assigned after jitter
  auto dwell = [&] { return detail::dwell_frames(rng, spec.control_hz); };

  const bool is_arm = spec.control_mode == ControlMode::abs_joint;
  const ArmGeometry* arm = is_arm ? &arm_geometry(spec.robot_tag) : nullptr;

  // control-space pose for an effector target (arms go through IK)
  auto pose_at = [&](double x, double y, double z, double yaw) -> std::vector<double> {
    if (spec.control_mode == ControlMode::delta_eef) return {x, y, z, yaw};
    std::vector<double> joints;
    bool got = spec.robot_tag == "planar-arm-2dof"
                   ? arm_ik_2dof(*arm, x, y, joints)
                   : arm_ik_3dof(*arm, x, y, yaw, joints);
    if (!got)
      raise(ErrorKind::planning_failure, "plan_trajectory: unreachable waypoint");
    return joints;
  };
  auto pointing = [&](double x, double y) {
    return is_arm ? std::atan2(y - arm->base_y, x - arm->base_x) : 0.0;
  };
  // wrist-yaw variety on the 3-DoF arm keeps the corpus covering the joint
  // ranges that rotation tasks visit; falls back to the pointing direction
  // when an offset is unreachable somewhere along the leg
  auto varied_yaw = [&](double fx, double fy, double gx, double gy) {
    double base_from = pointing(fx, fy);
    if (!is_arm || spec.robot_tag != "planar-arm-3dof") return base_from;
    double off = rng.uniform(-1.1, 1.1);
    std::vector<double> j;
    if (arm_ik_3dof(*arm, fx, fy, base_from + off, j) &&
        arm_ik_3dof(*arm, gx, gy, pointing(gx, gy) + off, j))
      return base_from + off;
    return base_from;
  };

  std::vector<double> start = inst.start_pose;
  double start_grip = 0.0;
  if (layout.has_grip) {
    start_grip = start.back();
    start.pop_back();
  }
  push(start, start_grip, 0);

  const double hover = detail::kHoverZ;
  const bool gripper = spec.control_mode == ControlMode::delta_eef;
  double eff_yaw0 = gripper ? start[3] : 0.0;

  switch (inst.family) {
    case TemplateFamily::pick_place:
    case TemplateFamily::rotate_reposition: {
      const auto& o = inst.scene_init.objects[inst.obj_index];
      double grasp_yaw = gripper ? eff_yaw0
                                 : varied_yaw(o.x, o.y, inst.goal_x, inst.goal_y);
      double goal_eff_yaw = grasp_yaw;
      if (inst.family == TemplateFamily::rotate_reposition) {
        grasp_yaw = gripper ? eff_yaw0 : pointing(o.x, o.y);
        goal_eff_yaw = grasp_yaw + wrap_angle(inst.goal_yaw - o.yaw);
      } else if (is_arm) {
        goal_eff_yaw = pointing(inst.goal_x, inst.goal_y) + (grasp_yaw - pointing(o.x, o.y));
      }
      if (gripper) {
        push(pose_at(o.x, o.y, hover, grasp_yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw), 1.0, dwell());
        push(pose_at(o.x, o.y, hover, grasp_yaw), 1.0, seg());
        push(pose_at(inst.goal_x, inst.goal_y, hover, goal_eff_yaw), 1.0, seg());
        push(pose_at(inst.goal_x, inst.goal_y, 0.0, goal_eff_yaw), 1.0, seg());
        push(pose_at(inst.goal_x, inst.goal_y, 0.0, goal_eff_yaw), 0.0, dwell());
        push(pose_at(inst.goal_x, inst.goal_y, hover, goal_eff_yaw), 0.0, seg());
      } else {
        push(pose_at(o.x, o.y, 0.0, grasp_yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw), 1.0, dwell());
        push(pose_at(inst.goal_x, inst.goal_y, 0.0, goal_eff_yaw), 1.0, seg());
        push(pose_at(inst.goal_x, inst.goal_y, 0.0, goal_eff_yaw), 0.0, dwell());
        push(start, 0.0, seg());
      }
      break;
    }
    case TemplateFamily::push:
    case TemplateFamily::pull: {
      const auto& o = inst.scene_init.objects[inst.obj_index];
      double yaw = gripper ? eff_yaw0 : varied_yaw(o.x, o.y, inst.goal_x, inst.goal_y);
      double goal_yaw_eff =
          gripper ? eff_yaw0 : pointing(inst.goal_x, inst.goal_y) + (yaw - pointing(o.x, o.y));
      if (gripper) {
        push(pose_at(o.x, o.y, hover, yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, yaw), 1.0, dwell());
        push(pose_at(inst.goal_x, inst.goal_y, 0.0, goal_yaw_eff), 1.0, seg());
        push(pose_at(inst.goal_x, inst.goal_y, 0.0, goal_yaw_eff), 0.0, dwell());
        push(pose_at(inst.goal_x, inst.goal_y, hover, goal_yaw_eff), 0.0, seg());
      } else {
        push(pose_at(o.x, o.y, 0.0, yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, yaw), 1.0, dwell());
        push(pose_at(inst.goal_x, inst.goal_y, 0.0, goal_yaw_eff), 1.0, seg());
        push(pose_at(inst.goal_x, inst.goal_y, 0.0, goal_yaw_eff), 0.0, dwell());
        push(start, 0.0, seg());
      }
      break;
    }
    case TemplateFamily::rotate_to_view: {
      if (spec.control_mode == ControlMode::waypoint) {
        double theta0 = start[2];
        double theta1 = theta0 + wrap_angle(inst.goal_yaw - theta0);
        push({start[0], start[1], theta1}, 0.0, seg());
        double adv = 0.12;
        double nx = start[0] + adv * std::cos(theta1);
        double ny = start[1] + adv * std::sin(theta1);
        if (inst.workspace.contains(nx, ny, 0.03)) push({nx, ny, theta1}, 0.0, seg());
        break;
      }
      const auto& o = inst.scene_init.objects[inst.obj_index];
      double grasp_yaw = gripper ? eff_yaw0 : pointing(o.x, o.y);
      double delta = wrap_angle(inst.goal_yaw - o.yaw);
      if (gripper) {
        push(pose_at(o.x, o.y, hover, grasp_yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw), 1.0, dwell());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw + delta), 1.0, seg());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw + delta), 0.0, dwell());
        push(pose_at(o.x, o.y, hover, grasp_yaw + delta), 0.0, seg());
      } else {
        push(pose_at(o.x, o.y, 0.0, grasp_yaw), 0.0, seg());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw), 1.0, dwell());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw + delta), 1.0, seg());
        push(pose_at(o.x, o.y, 0.0, grasp_yaw + delta), 0.0, dwell());
        push(start, 0.0, seg());
      }
      break;
    }
    case TemplateFamily::swap: {
      const auto& a = inst.scene_init.objects[inst.obj_index];
      const auto& b = inst.scene_init.objects[inst.obj_b_index];
      // temp parking spot away from both start positions
      double tx = 0, ty = 0;
      bool found = false;
      auto geom = detail::sample_geometry(spec);
      for (int t = 0; t < 128 && !found; ++t) {
        TaskSamplerOptions o2;
        if (!detail::sample_position(rng, spec, geom, o2, tx, ty)) break;
        found = std::hypot(tx - a.x, ty - a.y) > detail::kMinSeparation &&
                std::hypot(tx - b.x, ty - b.y) > detail::kMinSeparation;
      }
      if (!found) raise(ErrorKind::planning_failure, "swap: no parking spot");
      struct Move {
        double fx, fy, gx, gy;
      };
      std::vector<Move> moves = {{a.x, a.y, tx, ty}, {b.x, b.y, a.x, a.y}, {tx, ty, b.x, b.y}};
      for (const auto& mv : moves) {
        double y1 = gripper ? eff_yaw0 : varied_yaw(mv.fx, mv.fy, mv.gx, mv.gy);
        double y2 = gripper ? eff_yaw0 : pointing(mv.gx, mv.gy) + (y1 - pointing(mv.fx, mv.fy));
        if (gripper) {
          push(pose_at(mv.fx, mv.fy, hover, y1), 0.0, seg());
          push(pose_at(mv.fx, mv.fy, 0.0, y1), 0.0, seg());
          push(pose_at(mv.fx, mv.fy, 0.0, y1), 1.0, dwell());
          push(pose_at(mv.fx, mv.fy, hover, y1), 1.0, seg());
          push(pose_at(mv.gx, mv.gy, hover, y2), 1.0, seg());
          push(pose_at(mv.gx, mv.gy, 0.0, y2), 1.0, seg());
          push(pose_at(mv.gx, mv.gy, 0.0, y2), 0.0, dwell());
        } else {
          push(pose_at(mv.fx, mv.fy, 0.0, y1), 0.0, seg());
          push(pose_at(mv.fx, mv.fy, 0.0, y1), 1.0, dwell());
          push(pose_at(mv.gx, mv.gy, 0.0, y2), 1.0, seg());
          push(pose_at(mv.gx, mv.gy, 0.0, y2), 0.0, dwell());
        }
      }
      if (gripper) {
        auto last = keys.back().pose;
        last[2] = hover;
        push(last, 0.0, seg());
      } else {
        push(start, 0.0, seg());
      }
      break;
    }
    default:
      raise(ErrorKind::invalid_argument, "plan_trajectory: unsupported family");
  }

  // real-data profile: perturb non-critical keyframes (never grasp or goal
  // dwells, which carry the contact and success contracts)
  if (opts.real_profile) {
    for (std::size_t i = 1; i + 1 < keys.size(); ++i) {
      bool critical = keys[i].grip != keys[i - 1].grip || keys[i].grip != keys[i + 1].grip;
      if (!critical && !is_arm) detail::jitter(keys[i].pose, rng, 0.008, 2);
      if (!critical && is_arm) detail::jitter(keys[i].pose, rng, 0.01, layout.pose_dim);
    }
  }

  for (std::size_t i = 1; i < keys.size(); ++i)
    if (keys[i].frames <= 0)
      keys[i].frames = detail::seg_frames(
          rng, spec.control_hz, spec.control_mode,
          detail::pose_distance(keys[i - 1].pose, keys[i].pose, spec.control_mode),
          opts.real_profile);

  // sample the smooth track and derive native actions from it
  std::vector<std::vector<double>> poses;
  std::vector<double> grips;
  detail::sample_track(keys, poses, grips);
  const int T = static_cast<int>(poses.size());
  if (T < 2) raise(ErrorKind::planning_failure, "plan_trajectory: empty track");

  std::vector<std::vector<double>> actions(T - 1, std::vector<double>(spec.native_dim, 0.0));
  for (int t = 0; t + 1 < T; ++t) {
    switch (spec.control_mode) {
      case ControlMode::delta_eef:
        for (int d = 0; d < 4; ++d) actions[t][d] = poses[t + 1][d] - poses[t][d];
        actions[t][4] = grips[t + 1];
        break;
      case ControlMode::abs_joint:
        for (int d = 0; d < layout.pose_dim; ++d) actions[t][d] = poses[t + 1][d];
        actions[t][layout.pose_dim] = grips[t + 1];
        break;
      case ControlMode::waypoint:
        actions[t][0] = poses[t + 1][0] - poses[t][0];
        actions[t][1] = poses[t + 1][1] - poses[t][1];
        actions[t][2] = wrap_angle(poses[t + 1][2] - poses[t][2]);
        break;
    }
  }

  // replay through the world model; the final state must satisfy the task
  KinematicSim sim(spec, inst);
  Episode ep;
  ep.dataset_id = opts.dataset_id.empty()
                      ? std::string("syn/") + inst.embodiment_id
                      : opts.dataset_id + "/" + inst.embodiment_id;
  ep.embodiment_id = inst.embodiment_id;
  ep.family = family_name(inst.family);
  ep.instruction = inst.instruction.text;
  ep.seed = inst.seed;
  ep.control_hz = spec.control_hz;
  ep.state_dim = layout.state_dim();
  ep.action_dim = spec.native_dim;
  ep.id = std::string(family_name(inst.family)) + "-" + inst.embodiment_id + "-" +
          std::to_string(inst.seed);
  ep.planner_segments = static_cast<int>(keys.size()) - 1;

  auto push_state = [&](const std::vector<double>& row) {
    for (double v : row) ep.states.push_back(static_cast<float>(v));
  };
  push_state(sim.state_row());
  for (int t = 0; t + 1 < T; ++t) {
    sim.step(actions[t].data());
    push_state(sim.state_row());
    for (int d = 0; d < spec.native_dim; ++d)
      ep.actions.push_back(static_cast<float>(actions[t][d]));
  }

  if (!task_success(inst, sim))
    raise(ErrorKind::planning_failure, "plan_trajectory: success predicate failed after replay");
  return ep;
}

}  // namespace flowact
