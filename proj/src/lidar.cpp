#include "coopscene/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

#include <boost/polygon/voronoi.hpp>

#include "coopscene/error.hpp"

namespace coopscene {

Ray Ray::toward(const Vec3& origin, const Vec3& target) {
  const Vec3 d = target - origin;
  const double n = d.norm();
  if (!(n > 0)) throw Error(Errc::degenerate_input, "ray target coincides with its origin");
  return {origin, d / n};
}

namespace {

// Per-ray setup of the watertight test: permutation that makes the dominant
// direction component z, and the shear that maps the ray onto +z.
struct ShearedRay {
  int kx, ky, kz;
  double sx, sy, sz;
  Vec3 origin;

  explicit ShearedRay(const Ray& ray) : origin(ray.origin) {
    const Vec3& d = ray.direction;
    d.cwiseAbs().maxCoeff(&kz);
    kx = (kz + 1) % 3;
    ky = (kx + 1) % 3;
    if (d[kz] < 0) std::swap(kx, ky);
    sx = d[kx] / d[kz];
    sy = d[ky] / d[kz];
    sz = 1.0 / d[kz];
  }

  std::optional<double> intersect(const Triangle& tri, double max_distance) const {
    const Vec3 a = tri[0] - origin;
    const Vec3 b = tri[1] - origin;
    const Vec3 c = tri[2] - origin;
    const double ax = a[kx] - sx * a[kz], ay = a[ky] - sy * a[kz];
    const double bx = b[kx] - sx * b[kz], by = b[ky] - sy * b[kz];
    const double cx = c[kx] - sx * c[kz], cy = c[ky] - sy * c[kz];
    double u = cx * by - cy * bx;
    double v = ax * cy - ay * cx;
    double w = bx * ay - by * ax;
    if (u == 0 || v == 0 || w == 0) {
      const long double lu = static_cast<long double>(cx) * by - static_cast<long double>(cy) * bx;
      const long double lv = static_cast<long double>(ax) * cy - static_cast<long double>(ay) * cx;
      const long double lw = static_cast<long double>(bx) * ay - static_cast<long double>(by) * ax;
      u = static_cast<double>(lu);
      v = static_cast<double>(lv);
      w = static_cast<double>(lw);
    }
    if ((u < 0 || v < 0 || w < 0) && (u > 0 || v > 0 || w > 0)) return std::nullopt;
    const double det = u + v + w;
    if (det == 0) return std::nullopt;
    const double t = (u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz]) / det;
    if (!(t > 0) || !(t <= max_distance)) return std::nullopt;
    return t;
  }
};

// Slab test against a box, clipped to [0, t_max]. Returns the entry distance.
std::optional<double> enter_box(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, double t_max) {
  double t0 = 0, t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    if (std::isinf(inv_dir[k])) {
      if (origin[k] < box.lo[k] || origin[k] > box.hi[k]) return std::nullopt;
      continue;
    }
    double a = (box.lo[k] - origin[k]) * inv_dir[k];
    double b = (box.hi[k] - origin[k]) * inv_dir[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

Aabb triangle_bounds(const Triangle& tri) {
  Aabb box;
  for (const auto& p : tri) box.extend(p);
  // Pad so rounding in the slab test never rejects a triangle the exact test hits.
  const double pad = 1e-9 * (1.0 + box.hi.cwiseAbs().maxCoeff() + box.lo.cwiseAbs().maxCoeff());
  box.lo.array() -= pad;
  box.hi.array() += pad;
  return box;
}

constexpr std::uint32_t kLeafSize = 4;

}  // namespace

std::optional<double> intersect_triangle(const Ray& ray, const Triangle& tri, double max_distance) {
  return ShearedRay(ray).intersect(tri, max_distance);
}

MeshBVH::MeshBVH(std::vector<Triangle> triangles) : triangles_(std::move(triangles)) {
  if (triangles_.empty()) return;
  if (triangles_.size() > std::numeric_limits<std::uint32_t>::max() / 2) {
    throw Error(Errc::invalid_parameter, "mesh too large");
  }
  const auto n = static_cast<std::uint32_t>(triangles_.size());
  order_.resize(n);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    order_[i] = i;
    centroids[i] = (triangles_[i][0] + triangles_[i][1] + triangles_[i][2]) / 3.0;
  }
  nodes_.reserve(2 * n / kLeafSize + 2);
  build(0, n, centroids);
  bounds_ = nodes_.front().box;
}

std::uint32_t MeshBVH::build(std::uint32_t first, std::uint32_t count, std::vector<Vec3>& centroids) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, centroid_box;
  for (std::uint32_t i = first; i < first + count; ++i) {
    box.extend(triangle_bounds(triangles_[order_[i]]));
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis;
  (centroid_box.hi - centroid_box.lo).maxCoeff(&axis);
  const std::uint32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  const std::uint32_t left = build(first, mid - first, centroids);
  const std::uint32_t right = build(mid, first + count - mid, centroids);
  nodes_[index].first = left;
  nodes_[index].right = right;
  nodes_[index].count = 0;
  return index;
}

template <bool AnyHit>
std::optional<HitRecord> MeshBVH::traverse(const Ray& ray, double max_distance) const {
  if (triangles_.empty()) return std::nullopt;
  const ShearedRay sheared(ray);
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  double best_t = max_distance;
  std::size_t best_index = std::numeric_limits<std::size_t>::max();

  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!enter_box(node.box, ray.origin, inv_dir, best_t)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t tri = order_[i];
        const auto t = sheared.intersect(triangles_[tri], best_t);
        if (!t) continue;
        if (*t < best_t || tri < best_index) {
          best_t = *t;
          best_index = tri;
          if constexpr (AnyHit) return HitRecord{best_t, ray.at(best_t), best_index};
        }
      }
    } else {
      stack[top++] = node.right;
      stack[top++] = node.first;
    }
  }
  if (best_index == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  return HitRecord{best_t, ray.at(best_t), best_index};
}

std::optional<HitRecord> MeshBVH::cast(const Ray& ray, double max_distance) const {
  return traverse<false>(ray, max_distance);
}

bool MeshBVH::blocks(const Vec3& origin, const Vec3& point) const {
  if (triangles_.empty()) return false;
  const Vec3 d = point - origin;
  const double dist = d.norm();
  if (!(dist > 0)) return false;
  const Ray ray{origin, d / dist};
  return traverse<true>(ray, dist * (1 - 1e-9)).has_value();
}

MeshBVH MeshBVH::from_boxes(std::span<const BBox3D> boxes) {
  std::vector<Triangle> tris;
  tris.reserve(12 * boxes.size());
  for (const auto& b : boxes) {
    const auto t = box_triangles(b);
    tris.insert(tris.end(), t.begin(), t.end());
  }
  return MeshBVH(std::move(tris));
}

std::optional<HitRecord> cast_ray(const Ray& ray, const MeshBVH& bvh, double max_range) {
  return bvh.cast(ray, max_range);
}

std::vector<Triangle> box_triangles(const BBox3D& box) {
  const auto c = box_corners(box);
  std::vector<Triangle> out;
  out.reserve(12);
  out.push_back({c[0], c[2], c[1]});
  out.push_back({c[0], c[3], c[2]});
  out.push_back({c[4], c[5], c[6]});
  out.push_back({c[4], c[6], c[7]});
  for (int i = 0; i < 4; ++i) {
    const int j = (i + 1) % 4;
    out.push_back({c[i], c[j], c[j + 4]});
    out.push_back({c[i], c[j + 4], c[i + 4]});
  }
  return out;
}

Vec3 beam_direction(double elevation, double azimuth) {
  const double ce = std::cos(elevation);
  return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
}

namespace {

// Azimuth indices whose rays can reach the given bounds from `origin`, sorted.
std::vector<std::size_t> azimuth_window(const SensorConfig& sensor, const Vec3& origin, const Aabb& bounds) {
  const std::size_t count = sensor.azimuth_count();
  std::vector<std::size_t> all(count);
  for (std::size_t k = 0; k < count; ++k) all[k] = k;
  if (bounds.empty()) return {};
  const Vec2 o = origin.head<2>();
  if (o.x() >= bounds.lo.x() && o.x() <= bounds.hi.x() && o.y() >= bounds.lo.y() && o.y() <= bounds.hi.y()) {
    return all;
  }
  const Vec2 center = (bounds.lo.head<2>() + bounds.hi.head<2>()) / 2 - o;
  const double mid = std::atan2(center.y(), center.x());
  double lo = 0, hi = 0;
  for (int k = 0; k < 4; ++k) {
    const Vec2 corner(k & 1 ? bounds.hi.x() : bounds.lo.x(), k & 2 ? bounds.hi.y() : bounds.lo.y());
    const Vec2 rel = corner - o;
    const double delta = normalize_yaw(std::atan2(rel.y(), rel.x()) - mid);
    lo = std::min(lo, delta);
    hi = std::max(hi, delta);
  }
  const double step = sensor.azimuth_step;
  const auto first = static_cast<long long>(std::floor((mid + lo) / step)) - 1;
  const auto last = static_cast<long long>(std::ceil((mid + hi) / step)) + 1;
  if (last - first + 1 >= static_cast<long long>(count)) return all;
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(last - first + 1));
  const auto n = static_cast<long long>(count);
  for (long long k = first; k <= last; ++k) out.push_back(static_cast<std::size_t>(((k % n) + n) % n));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double distance_to_bounds(const Vec3& p, const Aabb& box) {
  return (p.cwiseMax(box.lo).cwiseMin(box.hi) - p).norm();
}

std::vector<ScanReturn> scan_window(const SensorConfig& sensor, const Aabb& window, const MeshBVH& target) {
  std::vector<ScanReturn> out;
  const Vec3 origin = sensor.origin();
  if (target.empty() || distance_to_bounds(origin, target.bounds()) > sensor.max_range) return out;
  const auto azimuths = azimuth_window(sensor, origin, window);
  for (std::size_t beam = 0; beam < sensor.beam_elevations.size(); ++beam) {
    const double el = sensor.beam_elevations[beam];
    for (std::size_t az : azimuths) {
      const Ray ray{origin, beam_direction(el, static_cast<double>(az) * sensor.azimuth_step)};
      if (const auto hit = target.cast(ray, sensor.max_range)) {
        out.push_back({hit->point, beam, az, hit->triangle_index});
      }
    }
  }
  return out;
}

}  // namespace

std::vector<ScanReturn> scan(const SensorConfig& sensor, const MeshBVH& target) {
  return scan_window(sensor, target.bounds(), target);
}

PointCloud render_entity(const SensorConfig& sensor, const Transform& sensor_pose, const EntityAsset& asset,
                         const Transform& entity_pose, double intensity) {
  const MeshBVH local(asset.mesh.triangles(sensor_pose.inverse() * entity_pose));
  PointCloud out;
  for (const auto& r : scan(sensor, local)) out.push_back(r.point, intensity);
  return out;
}

IndexSet cull_background_by_entity(const PointCloud& frame_cloud, const Vec3& sensor_origin, const MeshBVH& entity) {
  IndexSet out;
  if (entity.empty()) return out;
  for (std::size_t i = 0; i < frame_cloud.size(); ++i) {
    if (entity.blocks(sensor_origin, frame_cloud[i].position)) out.push_back(i);
  }
  return out;
}

IndexSet visible_entity_points(const PointCloud& entity_points, const Vec3& sensor_origin, const MeshBVH& occluders) {
  IndexSet out;
  for (std::size_t i = 0; i < entity_points.size(); ++i) {
    if (!occluders.blocks(sensor_origin, entity_points[i].position)) out.push_back(i);
  }
  return out;
}

PointCloud cull_entity_by_background(const PointCloud& entity_points, const Vec3& sensor_origin,
                                     const MeshBVH& occluders) {
  return subset(entity_points, visible_entity_points(entity_points, sensor_origin, occluders));
}

namespace {

bool excluded(std::span<const std::string> ids, const std::string& id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

}  // namespace

MeshBVH view_occluders(const Scene& scene, std::size_t view, std::span<const std::string> exclude_ids) {
  const Vec3 origin = scene.frames[view].sensor.origin();
  std::vector<BBox3D> boxes;
  for (const auto& o : scene.objects) {
    if (excluded(exclude_ids, o.object_id)) continue;
    const BBox3D local = scene.box_in_view(o.box, view);
    if (point_in_box(origin, local)) continue;
    boxes.push_back(local);
  }
  return MeshBVH::from_boxes(boxes);
}

MeshBVH world_occluders(const Scene& scene, const Vec3& sensor_origin_world, std::span<const std::string> exclude_ids) {
  std::vector<BBox3D> boxes;
  for (const auto& o : scene.objects) {
    if (excluded(exclude_ids, o.object_id)) continue;
    if (point_in_box(sensor_origin_world, o.box)) continue;
    boxes.push_back(o.box);
  }
  return MeshBVH::from_boxes(boxes);
}

MeshBVH meshify_ground(const PointCloud& road_points) {
  using boost::polygon::voronoi_diagram;
  constexpr double kSnap = 1e-4;

  std::vector<boost::polygon::point_data<int>> sites;
  std::vector<Vec3> lifted;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& p : road_points.points) {
    const double sx = std::round(p.position.x() / kSnap);
    const double sy = std::round(p.position.y() / kSnap);
    if (!(std::abs(sx) < 1e9) || !(std::abs(sy) < 1e9) || !std::isfinite(p.position.z())) {
      throw Error(Errc::degenerate_input, "road point out of range for meshing");
    }
    const auto ix = static_cast<int>(sx), iy = static_cast<int>(sy);
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) |
                              static_cast<std::uint32_t>(iy);
    if (!seen.insert(key).second) continue;
    sites.emplace_back(ix, iy);
    lifted.push_back(p.position);
  }
  if (sites.size() < 3) throw Error(Errc::degenerate_input, "ground meshing needs at least three distinct points");

  voronoi_diagram<double> vd;
  boost::polygon::construct_voronoi(sites.begin(), sites.end(), &vd);

  std::vector<Triangle> tris;
  std::vector<std::size_t> ring;
  for (const auto& vertex : vd.vertices()) {
    ring.clear();
    const auto* start = vertex.incident_edge();
    const auto* edge = start;
    do {
      ring.push_back(edge->cell()->source_index());
      edge = edge->rot_next();
    } while (edge != start);
    for (std::size_t k = 1; k + 1 < ring.size(); ++k) {
      tris.push_back({lifted[ring[0]], lifted[ring[k]], lifted[ring[k + 1]]});
    }
  }
  if (tris.empty()) throw Error(Errc::degenerate_input, "ground points are collinear");
  return MeshBVH(std::move(tris));
}

std::vector<ScanReturn> scan_shadow(const SensorConfig& sensor, const MeshBVH& mesh, const OcclusionRegion& shadow) {
  std::vector<ScanReturn> out;
  if (shadow.empty() || mesh.empty()) return out;
  for (const auto& r : scan_window(sensor, shadow.occluder->bounds(), mesh)) {
    if (shadow.contains(r.point)) out.push_back(r);
  }
  return out;
}

PointCloud complete_ground(const SensorConfig& sensor, const MeshBVH& ground, const OcclusionRegion& shadow,
                           double intensity) {
  PointCloud out;
  for (const auto& r : scan_shadow(sensor, ground, shadow)) out.push_back(r.point, intensity);
  return out;
}

std::vector<Vec3> occlusion_samples(const Vec3& sensor_origin, const BBox3D& target, int sample_count) {
  struct Face {
    Vec3 center, normal, e1, e2;
    double weight;
  };
  const auto& r = target.pose().rotation();
  const Vec3 h = target.dims() / 2;
  std::vector<Face> faces;
  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = axis == 0 ? 1 : 0;
    const int a2 = axis == 2 ? 1 : 2;
    for (int sign : {1, -1}) {
      Vec3 n = Vec3::Zero();
      n[axis] = sign;
      Vec3 e1 = Vec3::Zero(), e2 = Vec3::Zero();
      e1[a1] = h[a1];
      e2[a2] = h[a2];
      Face f{target.center() + r * (n * h[axis]), r * n, r * e1, r * e2, 0};
      const Vec3 to_sensor = sensor_origin - f.center;
      const double facing = f.normal.dot(to_sensor);
      if (!(facing > 0)) continue;
      const double d2 = to_sensor.squaredNorm();
      const double area = 4 * h[a1] * h[a2];
      f.weight = area * facing / (std::sqrt(d2) * d2);
      faces.push_back(f);
    }
  }
  std::vector<Vec3> out;
  if (faces.empty() || sample_count <= 0) return out;

  double total = 0;
  for (const auto& f : faces) total += f.weight;
  std::vector<int> counts(faces.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const double quota = sample_count * faces[i].weight / total;
    counts[i] = static_cast<int>(std::floor(quota));
    assigned += counts[i];
    remainders.emplace_back(quota - counts[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < sample_count; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];

  constexpr double kGolden = 0.6180339887498949;
  out.reserve(static_cast<std::size_t>(sample_count));
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const int m = counts[i];
    for (int s = 0; s < m; ++s) {
      const double u = (s + 0.5) / m;
      double v = 0.5 + s * kGolden;
      v -= std::floor(v);
      out.push_back(faces[i].center + (2 * u - 1) * faces[i].e1 + (2 * v - 1) * faces[i].e2);
    }
  }
  return out;
}

double occlusion_rate(const Vec3& sensor_origin, const BBox3D& target, const MeshBVH& occluders, int sample_count) {
  if (occluders.empty()) return 0.0;
  const auto samples = occlusion_samples(sensor_origin, target, sample_count);
  if (samples.empty()) return 0.0;
  std::size_t blocked = 0;
  for (const auto& s : samples) blocked += occluders.blocks(sensor_origin, s) ? 1 : 0;
  return static_cast<double>(blocked) / static_cast<double>(samples.size());
}

}  // namespace coopscene
