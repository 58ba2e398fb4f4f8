#include "coopscene/point_cloud.hpp"

#include <algorithm>

namespace coopscene {

PointCloud transformed(const PointCloud& cloud, const Transform& t) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back({t * p.position, p.intensity});
  return out;
}

PointCloud subset(const PointCloud& cloud, const IndexSet& indices) {
  PointCloud out;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) out.points.push_back(cloud.points[i]);
  return out;
}

PointCloud without(const PointCloud& cloud, const IndexSet& removed) {
  PointCloud out;
  out.points.reserve(cloud.size() - std::min(cloud.size(), removed.size()));
  auto next = removed.begin();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (next != removed.end() && *next == i) {
      ++next;
      continue;
    }
    out.points.push_back(cloud.points[i]);
  }
  return out;
}

IndexSet remap_after_removal(const IndexSet& indices, const IndexSet& removed) {
  IndexSet out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto below = std::lower_bound(removed.begin(), removed.end(), i);
    if (below != removed.end() && *below == i) continue;
    out.push_back(i - static_cast<std::size_t>(below - removed.begin()));
  }
  return out;
}

IndexSet points_in_box(const PointCloud& cloud, const BBox3D& box) {
  IndexSet out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (point_in_box(cloud.points[i].position, box)) out.push_back(i);
  }
  return out;
}

PointCloud quantized(const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    out.points.push_back({p.position.cast<float>().cast<double>(),
                          static_cast<double>(static_cast<float>(p.intensity))});
  }
  return out;
}

}  // namespace coopscene
