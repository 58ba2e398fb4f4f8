#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coopscene/geometry.hpp"
#include "coopscene/mesh.hpp"
#include "coopscene/point_cloud.hpp"
#include "coopscene/scene.hpp"

namespace coopscene {

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length

  /// Ray from `origin` toward `target`; target must differ from origin.
  static Ray toward(const Vec3& origin, const Vec3& target);

  Vec3 at(double distance) const { return origin + distance * direction; }
};

struct HitRecord {
  double distance = 0;
  Vec3 point = Vec3::Zero();
  std::size_t triangle_index = 0;
};

/// Watertight ray/triangle test (shear-and-scale into ray space, edge
/// functions evaluated with inclusive signs). Rays through a shared edge or
/// vertex hit at least one of the incident triangles. Returns the hit distance
/// when it lies in (0, max_distance].
std::optional<double> intersect_triangle(const Ray& ray, const Triangle& tri, double max_distance);

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool empty() const { return !(lo.x() <= hi.x()); }
};

/// Immutable bounding-volume hierarchy over a triangle soup. Queries return
/// exactly what a linear scan over all triangles returns: the nearest hit,
/// ties broken by the lowest triangle index.
class MeshBVH {
 public:
  MeshBVH() = default;
  explicit MeshBVH(std::vector<Triangle> triangles);

  /// Closed cuboids (12 triangles each) for every box.
  static MeshBVH from_boxes(std::span<const BBox3D> boxes);

  std::size_t size() const { return triangles_.size(); }
  bool empty() const { return triangles_.empty(); }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Aabb& bounds() const { return bounds_; }

  std::optional<HitRecord> cast(const Ray& ray, double max_distance) const;

  /// True if the open segment origin -> point crosses the mesh strictly
  /// before reaching the point.
  bool blocks(const Vec3& origin, const Vec3& point) const;

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first index into order_; inner: left child
    std::uint32_t count = 0;  // leaf: triangle count; inner: 0
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t first, std::uint32_t count, std::vector<Vec3>& centroids);
  template <bool AnyHit>
  std::optional<HitRecord> traverse(const Ray& ray, double max_distance) const;

  std::vector<Triangle> triangles_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  Aabb bounds_;
};

std::optional<HitRecord> cast_ray(const Ray& ray, const MeshBVH& bvh, double max_range);

/// 12 triangles covering the closed surface of the box.
std::vector<Triangle> box_triangles(const BBox3D& box);

/// Unit direction of lattice ray (elevation, azimuth) in the sensor frame.
Vec3 beam_direction(double elevation, double azimuth);

/// One return of a lattice scan.
struct ScanReturn {
  Vec3 point;  // agent-local frame
  std::size_t beam = 0;
  std::size_t azimuth = 0;
  std::size_t triangle_index = 0;
};

/// Casts every lattice ray whose azimuth can reach `target` (everything when
/// the sensor is above the target's footprint) and returns the hits within
/// max_range, ordered by (beam, azimuth). Inputs are in the agent-local frame.
std::vector<ScanReturn> scan(const SensorConfig& sensor, const MeshBVH& target);

/// Renders an asset placed at `entity_pose` (canonical -> world) as seen by a
/// sensor whose agent sits at `sensor_pose` (local -> world). Output points
/// are in the agent-local frame with constant intensity.
PointCloud render_entity(const SensorConfig& sensor, const Transform& sensor_pose, const EntityAsset& asset,
                         const Transform& entity_pose, double intensity = 0.5);

/// Indices of frame points shadowed by the entity: the segment from the
/// sensor origin to the point crosses the mesh before reaching the point.
IndexSet cull_background_by_entity(const PointCloud& frame_cloud, const Vec3& sensor_origin,
                                   const MeshBVH& entity);

/// Indices of entity points whose sight line is not blocked by occluders.
IndexSet visible_entity_points(const PointCloud& entity_points, const Vec3& sensor_origin,
                               const MeshBVH& occluders);

/// The visible subset of entity points.
PointCloud cull_entity_by_background(const PointCloud& entity_points, const Vec3& sensor_origin,
                                     const MeshBVH& occluders);

/// Occluder geometry of one view, in that view's local frame: the GT boxes of
/// the scene as opaque cuboids, skipping excluded ids and any box containing
/// the sensor origin.
MeshBVH view_occluders(const Scene& scene, std::size_t view, std::span<const std::string> exclude_ids = {});

/// Same, in the world frame, as seen from the given world-frame sensor origin.
MeshBVH world_occluders(const Scene& scene, const Vec3& sensor_origin_world,
                        std::span<const std::string> exclude_ids = {});

/// The part of space hidden from `sensor_origin` by the occluder mesh.
struct OcclusionRegion {
  Vec3 sensor_origin = Vec3::Zero();
  std::shared_ptr<const MeshBVH> occluder;

  bool empty() const { return !occluder || occluder->empty(); }
  bool contains(const Vec3& point) const { return !empty() && occluder->blocks(sensor_origin, point); }
};

/// Delaunay triangulation of the (x, y) projection, lifted back to each
/// point's z. Coincident (x, y) pairs keep their first point. Throws
/// degenerate_input for fewer than three distinct or all collinear points.
MeshBVH meshify_ground(const PointCloud& road_points);

/// Lattice returns off `mesh` that fall inside the shadow region, over the
/// azimuths the shadow's occluder spans, ordered by (beam, azimuth).
std::vector<ScanReturn> scan_shadow(const SensorConfig& sensor, const MeshBVH& mesh, const OcclusionRegion& shadow);

/// Scan-line returns on the ground surface, restricted to the shadow region.
/// Inputs and output are in the agent-local frame.
PointCloud complete_ground(const SensorConfig& sensor, const MeshBVH& ground, const OcclusionRegion& shadow,
                           double intensity = 0.5);

inline constexpr int kOcclusionSamples = 128;

/// Deterministic lattice on the target's sensor-facing faces. Samples are
/// split across faces in proportion to each face's approximate solid angle
/// (largest remainder), and laid out per face on a golden-ratio lattice.
std::vector<Vec3> occlusion_samples(const Vec3& sensor_origin, const BBox3D& target,
                                    int sample_count = kOcclusionSamples);

/// Fraction of sight lines from the sensor to the occlusion samples that are
/// blocked by the occluders before reaching the target.
double occlusion_rate(const Vec3& sensor_origin, const BBox3D& target, const MeshBVH& occluders,
                      int sample_count = kOcclusionSamples);

}  // namespace coopscene
