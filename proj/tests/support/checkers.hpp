#pragma once

// Post-hoc checkers for operator outputs, written without the library's
// road index, IoU or ray caster.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "coopscene/lidar.hpp"
#include "coopscene/operators.hpp"
#include "coopscene/scene.hpp"
#include "oracles.hpp"

namespace coopscene::testing {

struct PlacementVerdict {
  bool on_road = true;
  bool collision_free = true;
  bool visible_to_cooperative = false;
  std::string detail;

  bool ok() const { return on_road && collision_free && visible_to_cooperative; }
};

/// Footprint points on a regular grid of spacing <= step, edges included.
inline std::vector<Vec2> footprint_grid(const BBox3D& box, double step) {
  const auto corners = box_corners(box);
  const Vec3 ex = corners[0] - corners[1];  // +x side minus -x side
  const Vec3 ey = corners[1] - corners[2];
  const Vec3 base = corners[2];
  const int nl = static_cast<int>(std::ceil(box.length() / step));
  const int nw = static_cast<int>(std::ceil(box.width() / step));
  std::vector<Vec2> out;
  for (int i = 0; i <= nl; ++i) {
    for (int j = 0; j <= nw; ++j) {
      const Vec3 p = base + ex * (double(i) / nl) + ey * (double(j) / nw);
      out.emplace_back(p.x(), p.y());
    }
  }
  return out;
}

/// Positive-area overlap of two footprints by the separating axis theorem.
inline bool footprints_overlap(const BBox3D& a, const BBox3D& b) {
  const auto ca = box_corners(a), cb = box_corners(b);
  for (const BBox3D* box : {&a, &b}) {
    for (double angle : {box->yaw(), box->yaw() + std::acos(-1.0) / 2}) {
      const Vec2 axis(std::cos(angle), std::sin(angle));
      double alo = 1e300, ahi = -1e300, blo = 1e300, bhi = -1e300;
      for (int i = 0; i < 4; ++i) {
        const double pa = axis.dot(ca[i].head<2>()), pb = axis.dot(cb[i].head<2>());
        alo = std::min(alo, pa), ahi = std::max(ahi, pa);
        blo = std::min(blo, pb), bhi = std::max(bhi, pb);
      }
      if (std::min(ahi, bhi) - std::max(alo, blo) <= 1e-9) return false;
    }
  }
  return true;
}

inline bool inside_box(const Vec3& p, const BBox3D& box, double margin) {
  const Vec3 d = p - box.center();
  const double c = std::cos(box.yaw()), s = std::sin(box.yaw());
  const Vec3 local(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
  return (local.cwiseAbs() - box.dims() / 2).maxCoeff() <= margin;
}

inline std::vector<Triangle> cuboid(const BBox3D& box) {
  const auto c = box_corners(box);
  static constexpr int faces[6][4] = {{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                      {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
  std::vector<Triangle> out;
  for (const auto& f : faces) {
    out.push_back({c[f[0]], c[f[1]], c[f[2]]});
    out.push_back({c[f[0]], c[f[2]], c[f[3]]});
  }
  return out;
}

/// Road surface of one view in world xy: road returns (1 m discs) plus the
/// triangles of the beam/azimuth lattice between neighboring road returns.
class ViewRoad {
 public:
  ViewRoad(const AgentFrame& frame, const IndexSet& road, double radius) : radius_(radius) {
    const auto& beams = frame.sensor.beam_elevations;
    const auto n = static_cast<long long>(frame.sensor.azimuth_count());
    std::map<std::pair<long long, long long>, Vec3> cells;
    for (std::size_t i : road) {
      const Vec3 local = frame.cloud[i].position;
      const Vec3 d = local - frame.sensor.origin();
      const double elev = std::atan2(d.z(), std::hypot(d.x(), d.y()));
      long long beam = 0;
      for (std::size_t b = 1; b < beams.size(); ++b) {
        if (std::abs(beams[b] - elev) < std::abs(beams[beam] - elev)) beam = static_cast<long long>(b);
      }
      const long long az = ((std::llround(std::atan2(d.y(), d.x()) / frame.sensor.azimuth_step) % n) + n) % n;
      const Vec3 world = frame.pose * local;
      cells.emplace(std::make_pair(beam, az), world);
      points_.push_back(world.head<2>());
    }
    for (long long b = 0; b + 1 < static_cast<long long>(beams.size()); ++b) {
      for (long long k = 0; k < n; ++k) {
        const long long k1 = (k + 1) % n;
        const Vec3* q[4] = {nullptr, nullptr, nullptr, nullptr};  // (b,k) (b,k+1) (b+1,k+1) (b+1,k)
        const std::pair<long long, long long> keys[4] = {{b, k}, {b, k1}, {b + 1, k1}, {b + 1, k}};
        int present = 0;
        for (int i = 0; i < 4; ++i) {
          const auto it = cells.find(keys[i]);
          if (it != cells.end()) q[i] = &it->second, ++present;
        }
        if (present == 4) {
          tris_.push_back({q[0]->head<2>(), q[1]->head<2>(), q[2]->head<2>()});
          tris_.push_back({q[0]->head<2>(), q[2]->head<2>(), q[3]->head<2>()});
        } else if (present == 3) {
          std::vector<Vec2> t;
          for (const auto* p : q) {
            if (p) t.push_back(p->head<2>());
          }
          tris_.push_back({t[0], t[1], t[2]});
        }
      }
    }
    for (std::size_t i = 0; i < points_.size(); ++i) grid_[key(points_[i])].push_back(i);
  }

  bool covers(const Vec2& xy) const {
    const auto [cx, cy] = key(xy);
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        const auto it = grid_.find({cx + dx, cy + dy});
        if (it == grid_.end()) continue;
        for (std::size_t i : it->second) {
          if ((points_[i] - xy).norm() <= radius_) return true;
        }
      }
    }
    for (const auto& t : tris_) {
      const double d = (t[1] - t[0]).x() * (t[2] - t[0]).y() - (t[1] - t[0]).y() * (t[2] - t[0]).x();
      if (std::abs(d) < 1e-14) continue;
      const double l1 = ((xy - t[0]).x() * (t[2] - t[0]).y() - (xy - t[0]).y() * (t[2] - t[0]).x()) / d;
      const double l2 = ((t[1] - t[0]).x() * (xy - t[0]).y() - (t[1] - t[0]).y() * (xy - t[0]).x()) / d;
      if (l1 >= -1e-9 && l2 >= -1e-9 && l1 + l2 <= 1 + 1e-9) return true;
    }
    return false;
  }

 private:
  std::pair<long long, long long> key(const Vec2& xy) const {
    return {static_cast<long long>(std::floor(xy.x() / radius_)), static_cast<long long>(std::floor(xy.y() / radius_))};
  }

  double radius_;
  std::vector<Vec2> points_;
  std::vector<std::array<Vec2, 3>> tris_;
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> grid_;
};

/// Re-tests the insertion conditions for a world-frame box against the scene
/// it was placed into (without the box itself).
inline PlacementVerdict check_placement_independently(const Scene& scene, const BBox3D& box,
                                                      const OperatorConfig& config = {}) {
  PlacementVerdict v;
  const auto samples = footprint_grid(box, config.footprint_sample_step);
  for (std::size_t f = 0; f < scene.frames.size() && v.on_road; ++f) {
    const auto& frame = scene.frames[f];
    const IndexSet road = frame.road_mask ? *frame.road_mask : extract_road_indices(frame, config);
    const ViewRoad surface(frame, road, config.road_neighborhood);
    for (const auto& s : samples) {
      if (!surface.covers(s)) {
        v.on_road = false;
        v.detail = "footprint point (" + std::to_string(s.x()) + ", " + std::to_string(s.y()) + ") off road in " +
                   frame.agent_id;
        break;
      }
    }
  }
  for (const auto& o : scene.objects) {
    if (footprints_overlap(box, o.box)) {
      v.collision_free = false;
      v.detail += " overlaps " + o.object_id;
    }
  }
  for (const auto& frame : scene.frames) {
    const Vec3 c = frame.pose * Vec3(0, 0, config.agent_footprint.z() / 2);
    if (footprints_overlap(box, BBox3D(c, config.agent_footprint, frame.pose.yaw()))) {
      v.collision_free = false;
      v.detail += " overlaps agent " + frame.agent_id;
    }
  }
  for (const auto& frame : scene.frames) {
    if (frame.role != AgentRole::cooperative) continue;
    const Vec3 origin = frame.sensor_origin_world();
    std::vector<Triangle> occluders;
    for (const auto& o : scene.objects) {
      if (inside_box(origin, o.box, 0)) continue;
      const auto t = cuboid(o.box);
      occluders.insert(occluders.end(), t.begin(), t.end());
    }
    const auto samples3 = occlusion_samples(origin, box);
    int blocked = 0;
    for (const auto& s : samples3) blocked += segment_blocked(origin, s, occluders) ? 1 : 0;
    if (static_cast<double>(blocked) / static_cast<double>(samples3.size()) < config.max_occlusion) {
      v.visible_to_cooperative = true;
    }
  }
  if (!v.visible_to_cooperative) v.detail += " hidden from every cooperative agent";
  return v;
}

/// Rendered entity points of every view lie in the entity's GT box seen from
/// that view, inflated by `margin`. Returns the number of offending points.
inline std::size_t perspective_violations(const Scene& scene, const std::vector<ViewEdit>& edits,
                                          const BBox3D& world_box, double margin = 1e-3) {
  std::size_t bad = 0;
  for (std::size_t v = 0; v < scene.frames.size(); ++v) {
    const auto& frame = scene.frames[v];
    for (std::size_t i = edits[v].entity_begin; i < edits[v].entity_end; ++i) {
      if (!inside_box(frame.pose * frame.cloud[i].position, world_box, margin)) ++bad;
    }
  }
  return bad;
}

}  // namespace coopscene::testing
