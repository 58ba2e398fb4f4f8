#pragma once

#include <string>

#include "coopscene/mesh.hpp"
#include "coopscene/scene.hpp"
#include "coopscene/synthetic.hpp"

namespace coopscene::testing {

/// Ego plus one cooperative frame, ten float32-exact points each, one box.
inline Scene minimal_scene() {
  Scene s;
  s.scene_id = "minimal";
  s.timestamp = 12.5;
  for (int a = 0; a < 2; ++a) {
    AgentFrame f;
    f.agent_id = a == 0 ? "ego" : "cav1";
    f.role = a == 0 ? AgentRole::ego : AgentRole::cooperative;
    f.pose = Transform::FromYaw(a == 0 ? 0.0 : 0.5, Vec3(a * 10.0, a * -3.0, 0));
    f.sensor = SensorConfig::vlp32();
    for (int i = 0; i < 10; ++i) f.cloud.push_back(Vec3(i * 1.5, -i * 0.25, 0.125 * a), i / 16.0);
    s.frames.push_back(std::move(f));
  }
  s.objects.push_back({BBox3D(Vec3(8, 1, 0.75), 4.5, 1.8, 1.5, 0.1), "obj1", "car"});
  return s;
}

/// Axis-aligned unit cube mesh, 12 outward-facing triangles.
inline TriangleMesh unit_cube_mesh() { return make_box_asset(Vec3(1, 1, 1)).mesh; }

}  // namespace coopscene::testing
