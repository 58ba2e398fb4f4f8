#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coopscene/geometry.hpp"
#include "coopscene/point_cloud.hpp"

namespace coopscene {

/// Spinning LiDAR description. Beam elevations are in radians, strictly
/// increasing. The sensor sits sensor_origin_height meters above the origin of
/// its agent-local frame, whose origin is on the ground under the sensor.
struct SensorConfig {
  std::vector<double> beam_elevations;
  double azimuth_step = 0;
  double max_range = 0;
  double sensor_origin_height = 0;

  /// 32-beam, non-uniform elevation table (-25 deg .. +15 deg), 0.2 deg
  /// azimuth step, 100 m range, sensor 1.7 m above ground.
  static SensorConfig vlp32();

  /// Sensor origin in the agent-local frame.
  Vec3 origin() const { return {0, 0, sensor_origin_height}; }

  /// Number of azimuth samples per revolution; the lattice is phase aligned
  /// so sample k points at k * azimuth_step from +x.
  std::size_t azimuth_count() const;

  /// Empty when valid, otherwise a description of the first violation.
  std::string violation() const;

  bool operator==(const SensorConfig&) const = default;
};

enum class AgentRole { ego, cooperative };

std::string_view to_string(AgentRole role);

struct AgentFrame {
  std::string agent_id;
  AgentRole role = AgentRole::cooperative;
  Transform pose;  // agent-local -> world
  PointCloud cloud;  // agent-local frame
  SensorConfig sensor;
  std::optional<IndexSet> road_mask;  // indices into cloud flagged as road surface

  Vec3 sensor_origin_world() const { return pose * sensor.origin(); }

  bool operator==(const AgentFrame& other) const;
};

struct GroundTruthObject {
  BBox3D box;  // world frame
  std::string object_id;
  std::string label;

  bool operator==(const GroundTruthObject&) const = default;
};

/// One multi-view sample: exactly one ego frame, at least one cooperative
/// frame, ground truth in the world frame.
struct Scene {
  std::string scene_id;
  double timestamp = 0;
  std::vector<AgentFrame> frames;
  std::vector<GroundTruthObject> objects;

  std::size_t ego_index() const;
  const AgentFrame& ego() const { return frames[ego_index()]; }

  /// Index of the object with this id, if present.
  std::optional<std::size_t> find_object(std::string_view object_id) const;

  /// GT box expressed in the local frame of frames[view].
  BBox3D box_in_view(const BBox3D& world_box, std::size_t view) const;

  bool operator==(const Scene&) const = default;
};

/// All invariant violations, one message each; empty when the scene is valid.
std::vector<std::string> scene_violations(const Scene& scene);

/// Throws Error(invariant_violation) on the first violation.
void validate_scene(const Scene& scene);

}  // namespace coopscene
