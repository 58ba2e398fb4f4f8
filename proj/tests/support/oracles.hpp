#pragma once

// Independent reference implementations used to check the library. They
// favor obviousness over speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "coopscene/geometry.hpp"
#include "coopscene/mesh.hpp"

namespace coopscene::testing {

/// Moller-Trumbore in long double; returns t > 0 or nothing.
inline std::optional<long double> ray_triangle(const Vec3& o, const Vec3& d, const Triangle& tri) {
  using L = long double;
  const L ox = o.x(), oy = o.y(), oz = o.z(), dx = d.x(), dy = d.y(), dz = d.z();
  const L ax = tri[0].x(), ay = tri[0].y(), az = tri[0].z();
  const L e1x = tri[1].x() - ax, e1y = tri[1].y() - ay, e1z = tri[1].z() - az;
  const L e2x = tri[2].x() - ax, e2y = tri[2].y() - ay, e2z = tri[2].z() - az;
  const L px = dy * e2z - dz * e2y, py = dz * e2x - dx * e2z, pz = dx * e2y - dy * e2x;
  const L det = e1x * px + e1y * py + e1z * pz;
  if (std::fabs(det) < 1e-30L) return std::nullopt;
  const L inv = 1 / det;
  const L tx = ox - ax, ty = oy - ay, tz = oz - az;
  const L u = (tx * px + ty * py + tz * pz) * inv;
  if (u < 0 || u > 1) return std::nullopt;
  const L qx = ty * e1z - tz * e1y, qy = tz * e1x - tx * e1z, qz = tx * e1y - ty * e1x;
  const L v = (dx * qx + dy * qy + dz * qz) * inv;
  if (v < 0 || u + v > 1) return std::nullopt;
  const L t = (e2x * qx + e2y * qy + e2z * qz) * inv;
  if (t <= 0) return std::nullopt;
  return t;
}

struct BruteHit {
  double distance;
  std::size_t index;
};

/// Nearest hit over all triangles within max_distance; ties to the lowest index.
inline std::optional<BruteHit> brute_cast(const Vec3& o, const Vec3& d, const std::vector<Triangle>& tris,
                                          double max_distance) {
  std::optional<BruteHit> best;
  for (std::size_t i = 0; i < tris.size(); ++i) {
    const auto t = ray_triangle(o, d, tris[i]);
    if (!t || *t > max_distance) continue;
    if (!best || static_cast<double>(*t) < best->distance) best = BruteHit{static_cast<double>(*t), i};
  }
  return best;
}

/// True if some triangle crosses the segment origin -> point strictly before the point.
inline bool segment_blocked(const Vec3& origin, const Vec3& point, const std::vector<Triangle>& tris) {
  const Vec3 delta = point - origin;
  const double len = delta.norm();
  if (len == 0) return false;
  const Vec3 d = delta / len;
  for (const auto& tri : tris) {
    const auto t = ray_triangle(origin, d, tri);
    if (t && *t < len * (1 - 1e-9)) return true;
  }
  return false;
}

/// Slab test: does the open segment a -> b pass through the interior of the box?
inline bool segment_hits_box(const Vec3& a, const Vec3& b, const BBox3D& box) {
  const Transform to_box = box.pose().inverse();
  const Vec3 p = to_box * a, q = to_box * b;
  double t0 = 0, t1 = 1;
  for (int k = 0; k < 3; ++k) {
    const double h = box.dims()[k] / 2;
    const double d = q[k] - p[k];
    if (std::abs(d) < 1e-15) {
      if (std::abs(p[k]) >= h) return false;
      continue;
    }
    double ta = (-h - p[k]) / d, tb = (h - p[k]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 < t1;
}

/// Geodesic sphere from a subdivided icosahedron, all vertices on the sphere.
inline std::vector<Triangle> icosphere(const Vec3& center, double radius, int subdivisions) {
  const double g = (1 + std::sqrt(5.0)) / 2;
  std::vector<Vec3> v = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                         {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      return mid[key] = static_cast<int>(v.size()) - 1;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& t : f) {
      const int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  std::vector<Triangle> out;
  for (const auto& t : f) out.push_back({center + radius * v[t[0]], center + radius * v[t[1]], center + radius * v[t[2]]});
  return out;
}

/// Entry distance of a ray into a sphere, if it hits.
inline std::optional<double> ray_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double b = oc.dot(d);
  const double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t <= 0) return std::nullopt;
  return t;
}

/// Euclidean distance from p to a triangle: projection onto the plane when it
/// falls inside, otherwise the nearest edge segment.
inline double point_triangle_distance(const Vec3& p, const Triangle& t) {
  auto segment = [&](const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (p - (a + s * ab)).norm();
  };
  const Vec3 n = (t[1] - t[0]).cross(t[2] - t[0]);
  const Vec3 q = p - n * ((p - t[0]).dot(n) / n.squaredNorm());
  bool inside = true;
  for (int i = 0; i < 3; ++i) {
    if ((t[(i + 1) % 3] - t[i]).cross(q - t[i]).dot(n) < 0) inside = false;
  }
  if (inside) return (p - q).norm();
  return std::min({segment(t[0], t[1]), segment(t[1], t[2]), segment(t[2], t[0])});
}

}  // namespace coopscene::testing
