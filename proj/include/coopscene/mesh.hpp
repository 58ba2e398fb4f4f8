#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coopscene/geometry.hpp"

namespace coopscene {

using Triangle = std::array<Vec3, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  std::size_t triangle_count() const { return faces.size(); }
  Triangle triangle(std::size_t i) const {
    return {vertices[faces[i][0]], vertices[faces[i][1]], vertices[faces[i][2]]};
  }
  /// Triangle soup with every vertex mapped through `t`.
  std::vector<Triangle> triangles(const Transform& t = Transform::Identity()) const;

  Vec3 min_corner() const;
  Vec3 max_corner() const;
};

/// Every undirected edge is shared by exactly two faces.
bool is_watertight(const TriangleMesh& mesh);

/// Watertight insertion asset in its canonical frame: footprint centered on
/// the origin, ground plane at z = 0, heading along +x.
struct EntityAsset {
  std::string asset_id;
  TriangleMesh mesh;
  Vec3 canonical_dims = Vec3::Zero();  // length (x), width (y), height (z)

  /// Normalizes `mesh` into the canonical frame and validates it. Throws
  /// non_watertight_mesh or degenerate_triangle.
  static EntityAsset from_mesh(std::string asset_id, TriangleMesh mesh);

  /// Anisotropic rescale so canonical_dims == dims.
  EntityAsset scaled_to(const Vec3& dims) const;

  /// Box occupied by the asset when placed with `pose` (canonical -> host).
  /// The pose is expected to be a yaw rotation plus translation.
  BBox3D placed_box(const Transform& pose) const;
};

/// The canonical proxy vehicle: a closed, star-shaped side profile (bumper,
/// hood, windshield, roof, rear window) extruded across the width. 16 vertices,
/// 28 triangles, exact extents equal to `dims`.
EntityAsset make_proxy_car(const Vec3& dims = Vec3(4.5, 1.8, 1.5), std::string asset_id = "proxy_car");

/// Axis-aligned cuboid asset (12 triangles).
EntityAsset make_box_asset(const Vec3& dims, std::string asset_id = "box");

/// Reads the ASCII mesh format: `v x y z` vertex lines and `f i j k ...` face
/// lines with 1-based indices (OBJ subset; `i/t/n` tokens use the first index,
/// polygons are fan triangulated). `#` starts a comment. The asset id is the
/// file stem.
EntityAsset load_entity_asset(const std::filesystem::path& path);

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace coopscene
