#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/core/embodiment.hpp"
#include "flowact/scene.hpp"
#include "flowact/text/grammar.hpp"

namespace flowact {

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

// ---- state layout ----------------------------------------------------------
// Row layout: [pose prefix][grip?][2 object blocks of (x, y, yaw, present,
// color one-hot x4)]. The pose prefix is the sub-vector pseudo-actions are
// derived from.

struct StateLayout {
  int pose_dim = 0;
  bool has_grip = false;
  static constexpr int kMaxObjects = 2;
  static constexpr int kObjectBlock = 8;

  int grip_index() const { return pose_dim; }
  int objects_offset() const { return pose_dim + (has_grip ? 1 : 0); }
  int object_offset(int i) const { return objects_offset() + i * kObjectBlock; }
  int state_dim() const { return objects_offset() + kMaxObjects * kObjectBlock; }
};

inline StateLayout state_layout(const EmbodimentSpec& spec) {
  StateLayout l;
  switch (spec.control_mode) {
    case ControlMode::delta_eef:
      l.pose_dim = 4;  // x, y, z, yaw
      l.has_grip = true;
      break;
    case ControlMode::abs_joint:
      l.pose_dim = spec.native_dim - 1;  // joint angles; grip is the last channel
      l.has_grip = true;
      break;
    case ControlMode::waypoint:
      l.pose_dim = 3;  // x, y, heading
      l.has_grip = false;
      break;
  }
  return l;
}

inline int color_index(const std::string& color) {
  const auto& names = color_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == color) return static_cast<int>(i);
  raise(ErrorKind::invalid_argument, "unknown color: " + color);
}

// ---- planar arm kinematics --------------------------------------------------

struct ArmGeometry {
  double base_x = 0.5;
  double base_y = 0.05;
  std::vector<double> links;

  double reach_max() const {
    double s = 0;
    for (double l : links) s += l;
    return s;
  }
};

inline const ArmGeometry& arm_geometry(const std::string& tag) {
  static const ArmGeometry two{0.5, 0.05, {0.28, 0.22}};
  static const ArmGeometry three{0.5, 0.05, {0.22, 0.18, 0.12}};
  if (tag == "planar-arm-2dof") return two;
  if (tag == "planar-arm-3dof") return three;
  raise(ErrorKind::invalid_argument, "not an arm embodiment: " + tag);
}

// Forward kinematics: returns (x, y, yaw) of the effector.
inline void arm_fk(const ArmGeometry& g, const double* joints, double& x, double& y, double& yaw) {
  x = g.base_x;
  y = g.base_y;
  double a = 0.0;
  for (std::size_t i = 0; i < g.links.size(); ++i) {
    a += joints[i];
    x += g.links[i] * std::cos(a);
    y += g.links[i] * std::sin(a);
  }
  yaw = wrap_angle(a);
}

// Two-link IK (elbow-up). Returns false when the point is out of reach.
inline bool ik_two_link(double l1, double l2, double x, double y, double& t1, double& t2) {
  double r2 = x * x + y * y;
  double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (c2 < -1.0 || c2 > 1.0) return false;
  t2 = std::acos(c2);
  t1 = std::atan2(y, x) - std::atan2(l2 * std::sin(t2), l1 + l2 * std::cos(t2));
  return true;
}

// 2-DoF arm: effector position determines the joints (and the yaw).
inline bool arm_ik_2dof(const ArmGeometry& g, double x, double y, std::vector<double>& joints) {
  double t1, t2;
  if (!ik_two_link(g.links[0], g.links[1], x - g.base_x, y - g.base_y, t1, t2)) return false;
  joints = {t1, t2};
  return true;
}

// 3-DoF arm: position plus desired effector yaw.
inline bool arm_ik_3dof(const ArmGeometry& g, double x, double y, double yaw,
                        std::vector<double>& joints) {
  double wx = x - g.links[2] * std::cos(yaw) - g.base_x;
  double wy = y - g.links[2] * std::sin(yaw) - g.base_y;
  double t1, t2;
  if (!ik_two_link(g.links[0], g.links[1], wx, wy, t1, t2)) return false;
  joints = {t1, t2, wrap_angle(yaw - t1 - t2)};
  return true;
}

// ---- task instance ----------------------------------------------------------

struct Workspace {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  bool contains(double x, double y, double margin = 0.0) const {
    return x >= xmin + margin && x <= xmax - margin && y >= ymin + margin && y <= ymax - margin;
  }
};

struct TaskInstance {
  TemplateFamily family = TemplateFamily::pick_place;
  std::string embodiment_id;
  Scene scene_init;
  Workspace workspace;
  std::vector<double> start_pose;  // pose prefix (+ grip when present)

  int obj_index = -1;    // primary object
  int dst_index = -1;    // container object (pick-place, rotate-reposition)
  int obj_b_index = -1;  // swap partner
  double goal_x = 0.0, goal_y = 0.0, goal_yaw = 0.0;
  std::string direction;    // push
  std::string view_target;  // rotate-to-view
  Instruction instruction;
  std::uint64_t seed = 0;
};

// ---- kinematic world --------------------------------------------------------
// Shared by the trajectory planner (data generation) and the closed-loop
// environments, so planner output is executable by construction.

inline constexpr double kGraspRadius = 0.05;
inline constexpr double kSuccessPosEps = 0.03;
inline constexpr double kSuccessYawEps = 0.1;

class KinematicSim {
 public:
  KinematicSim(const EmbodimentSpec& spec, const TaskInstance& inst)
      : spec_(spec), layout_(state_layout(spec)), scene_(inst.scene_init) {
    pose_ = inst.start_pose;
    if (layout_.has_grip) {
      grip_ = pose_.back();
      pose_.pop_back();
    }
    if (static_cast<int>(pose_.size()) != layout_.pose_dim)
      raise(ErrorKind::invalid_argument, "start_pose size mismatch");
  }

  const EmbodimentSpec& spec() const { return spec_; }
  const StateLayout& layout() const { return layout_; }
  const Scene& scene() const { return scene_; }
  const std::vector<double>& pose() const { return pose_; }
  double grip() const { return grip_; }
  int attached() const { return attached_; }

  void effector(double& x, double& y, double& yaw) const {
    switch (spec_.control_mode) {
      case ControlMode::delta_eef:
        x = pose_[0];
        y = pose_[1];
        yaw = pose_[3];
        break;
      case ControlMode::abs_joint:
        arm_fk(arm_geometry(spec_.robot_tag), pose_.data(), x, y, yaw);
        break;
      case ControlMode::waypoint:
        x = pose_[0];
        y = pose_[1];
        yaw = pose_[2];
        break;
    }
  }

  // One control step with a native-unit action row.
  void step(const double* a) {
    double ex0 = 0, ey0 = 0, eyaw0 = 0;
    effector(ex0, ey0, eyaw0);
    switch (spec_.control_mode) {
      case ControlMode::delta_eef:
        pose_[0] += a[0];
        pose_[1] += a[1];
        pose_[2] = std::max(0.0, pose_[2] + a[2]);
        pose_[3] += a[3];
        grip_ = a[4];
        break;
      case ControlMode::abs_joint: {
        for (int i = 0; i < layout_.pose_dim; ++i) pose_[i] = a[i];
        grip_ = a[layout_.pose_dim];
        break;
      }
      case ControlMode::waypoint:
        pose_[0] += a[0];
        pose_[1] += a[1];
        pose_[2] = wrap_angle(pose_[2] + a[2]);
        break;
    }
    update_attachment(ex0, ey0, eyaw0);
  }

  std::vector<double> state_row() const {
    std::vector<double> row(layout_.state_dim(), 0.0);
    for (int i = 0; i < layout_.pose_dim; ++i) row[i] = pose_[i];
    if (layout_.has_grip) row[layout_.grip_index()] = grip_;
    for (int i = 0; i < StateLayout::kMaxObjects; ++i) {
      int off = layout_.object_offset(i);
      if (i < static_cast<int>(scene_.objects.size())) {
        const auto& o = scene_.objects[i];
        row[off + 0] = o.x;
        row[off + 1] = o.y;
        row[off + 2] = o.yaw;
        row[off + 3] = 1.0;
        row[off + 4 + color_index(o.color)] = 1.0;
      }
    }
    return row;
  }

 private:
  void update_attachment(double ex0, double ey0, double eyaw0) {
    double ex = 0, ey = 0, eyaw = 0;
    effector(ex, ey, eyaw);
    const bool closed = grip_ >= 0.5;
    if (layout_.has_grip && closed && attached_ < 0) {
      double best = kGraspRadius;
      for (std::size_t i = 0; i < scene_.objects.size(); ++i) {
        double d = std::hypot(scene_.objects[i].x - ex, scene_.objects[i].y - ey);
        if (d <= best) {
          best = d;
          attached_ = static_cast<int>(i);
        }
      }
      if (attached_ >= 0) {
        // magnetic toy grasp: the object snaps to the effector axis, its own
        // orientation offset is preserved
        off_x_ = 0.0;
        off_y_ = 0.0;
        off_yaw_ = wrap_angle(scene_.objects[attached_].yaw - eyaw);
      }
    }
    if (layout_.has_grip && !closed) attached_ = -1;
    if (attached_ >= 0) {
      auto& o = scene_.objects[attached_];
      o.x = ex + off_x_;
      o.y = ey + off_y_;
      o.yaw = wrap_angle(eyaw + off_yaw_);
    }
    (void)ex0;
    (void)ey0;
    (void)eyaw0;
  }

  EmbodimentSpec spec_;
  StateLayout layout_;
  Scene scene_;
  std::vector<double> pose_;
  double grip_ = 0.0;
  int attached_ = -1;
  double off_x_ = 0.0, off_y_ = 0.0, off_yaw_ = 0.0;
};

// Family success predicate evaluated on the current world state.
inline bool task_success(const TaskInstance& inst, const KinematicSim& sim) {
  auto obj_at = [&](int idx, double gx, double gy) {
    const auto& o = sim.scene().objects[idx];
    return std::hypot(o.x - gx, o.y - gy) <= kSuccessPosEps;
  };
  const bool released = sim.attached() < 0;
  switch (inst.family) {
    case TemplateFamily::pick_place:
    case TemplateFamily::push:
    case TemplateFamily::pull:
      return obj_at(inst.obj_index, inst.goal_x, inst.goal_y) && released;
    case TemplateFamily::rotate_reposition: {
      const auto& o = sim.scene().objects[inst.obj_index];
      return obj_at(inst.obj_index, inst.goal_x, inst.goal_y) &&
             std::abs(wrap_angle(o.yaw - inst.goal_yaw)) <= kSuccessYawEps && released;
    }
    case TemplateFamily::rotate_to_view: {
      if (inst.embodiment_id == "planar-navigator") {
        double x, y, yaw;
        sim.effector(x, y, yaw);
        return std::abs(wrap_angle(yaw - inst.goal_yaw)) <= kSuccessYawEps;
      }
      const auto& o = sim.scene().objects[inst.obj_index];
      return std::abs(wrap_angle(o.yaw - inst.goal_yaw)) <= kSuccessYawEps && released;
    }
    case TemplateFamily::swap: {
      const auto& a = inst.scene_init.objects[inst.obj_index];
      const auto& b = inst.scene_init.objects[inst.obj_b_index];
      return obj_at(inst.obj_index, b.x, b.y) && obj_at(inst.obj_b_index, a.x, a.y) && released;
    }
    case TemplateFamily::scene_caption:
      return false;
  }
  return false;
}

}  // namespace flowact
