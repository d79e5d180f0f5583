#pragma once

#include <string>
#include <vector>

namespace flowact {

struct SceneObject {
  std::string name;
  std::string color;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

struct Scene {
  std::vector<SceneObject> objects;

  const SceneObject* find(const std::string& color, const std::string& name) const {
    for (const auto& o : objects)
      if (o.color == color && o.name == name) return &o;
    return nullptr;
  }
};

}  // namespace flowact
