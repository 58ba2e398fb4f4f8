#pragma once

#include <cstddef>
#include <vector>

#include "coopscene/geometry.hpp"

namespace coopscene {

/// Sorted, duplicate-free list of point indices.
using IndexSet = std::vector<std::size_t>;

struct LidarPoint {
  Vec3 position = Vec3::Zero();
  double intensity = 0;

  bool operator==(const LidarPoint&) const = default;
};

/// Unordered set of LiDAR returns in one frame. Stored in double precision in
/// memory; the on-disk format is float32.
struct PointCloud {
  std::vector<LidarPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const LidarPoint& operator[](std::size_t i) const { return points[i]; }

  void push_back(const Vec3& position, double intensity) { points.push_back({position, intensity}); }
  void append(const PointCloud& other) { points.insert(points.end(), other.points.begin(), other.points.end()); }

  bool operator==(const PointCloud&) const = default;
};

PointCloud transformed(const PointCloud& cloud, const Transform& t);

/// Points at the given (sorted) indices, in order.
PointCloud subset(const PointCloud& cloud, const IndexSet& indices);

/// Points not listed in the (sorted) index set, in order.
PointCloud without(const PointCloud& cloud, const IndexSet& removed);

/// Maps indices of `cloud` to indices of without(cloud, removed); entries
/// that were removed are dropped.
IndexSet remap_after_removal(const IndexSet& indices, const IndexSet& removed);

/// Indices of points inside the oriented box, boundary inclusive.
IndexSet points_in_box(const PointCloud& cloud, const BBox3D& box);

/// Rounds every coordinate and intensity to float32, the storage precision.
PointCloud quantized(const PointCloud& cloud);

}  // namespace coopscene
