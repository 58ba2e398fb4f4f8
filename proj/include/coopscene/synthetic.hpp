#pragma once

#include <cstdint>
#include <vector>

#include "coopscene/lidar.hpp"
#include "coopscene/mesh.hpp"
#include "coopscene/scene.hpp"

namespace coopscene {

struct SyntheticOptions {
  std::uint64_t seed = 1;
  int agents = 3;  // ego plus cooperative vehicles, 2..4
  int min_cars = 3;
  int max_cars = 10;
  bool buildings = true;
  bool road_mask = true;
  double slope = 0;  // ground z = slope * x
  SensorConfig sensor = SensorConfig::vlp32();
};

inline constexpr double road_half_width = 7.0;

inline double ground_z(double slope, double x) { return slope * x; }

/// World-frame geometry of a synthetic scene. Triangles [0, ground_triangles)
/// form the ground plane.
struct SyntheticWorld {
  std::vector<Triangle> triangles;
  std::size_t ground_triangles = 0;
  double slope = 0;
};

struct SyntheticScene {
  Scene scene;
  SyntheticWorld world;
};

/// Straight four-lane road along x (|y| <= road_half_width) on a planar
/// ground, proxy cars in the lanes, buildings beside the road. Every agent's
/// cloud is a full lattice scan of the same world geometry.
SyntheticScene make_synthetic(const SyntheticOptions& options);
inline Scene make_synthetic_scene(const SyntheticOptions& options) { return make_synthetic(options).scene; }

/// Renders one agent's cloud from world triangles; fills `road` (ground hits
/// inside the road strip) when non-null.
PointCloud render_view(const SyntheticWorld& world, const AgentFrame& frame, IndexSet* road);

}  // namespace coopscene
