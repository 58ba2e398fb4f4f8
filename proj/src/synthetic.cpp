#include "coopscene/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coopscene/rng.hpp"

namespace coopscene {

namespace {

constexpr double kDeg = std::numbers::pi / 180;
constexpr double kLanes[4] = {-5.25, -1.75, 1.75, 5.25};

struct Slot {
  double lane;
  double x0, x1;
};

bool overlaps(const std::vector<Slot>& used, double lane, double x0, double x1, double gap) {
  for (const auto& s : used) {
    if (s.lane == lane && x0 < s.x1 + gap && x1 > s.x0 - gap) return true;
  }
  return false;
}

Transform ground_pose(double slope, double x, double y, double yaw) {
  return Transform::FromYaw(yaw, Vec3(x, y, ground_z(slope, x)));
}

}  // namespace

PointCloud render_view(const SyntheticWorld& world, const AgentFrame& frame, IndexSet* road) {
  const Transform to_local = frame.pose.inverse();
  std::vector<Triangle> local;
  local.reserve(world.triangles.size());
  for (const auto& t : world.triangles) local.push_back({to_local * t[0], to_local * t[1], to_local * t[2]});
  const MeshBVH bvh(std::move(local));
  PointCloud cloud;
  if (road) road->clear();
  for (const auto& r : scan(frame.sensor, bvh)) {
    if (road && r.triangle_index < world.ground_triangles &&
        std::abs((frame.pose * r.point).y()) <= road_half_width) {
      road->push_back(cloud.size());
    }
    cloud.push_back(r.point, 0.3);
  }
  return cloud;
}

SyntheticScene make_synthetic(const SyntheticOptions& options) {
  Rng rng = Rng::keyed(options.seed, {0x5ce7e});
  SyntheticScene out;
  Scene& scene = out.scene;
  SyntheticWorld& world = out.world;
  world.slope = options.slope;
  scene.scene_id = "syn" + std::to_string(options.seed);
  scene.timestamp = static_cast<double>(options.seed % 100000) * 0.1;

  // Ground plane, two triangles.
  const double e = 250;
  const auto g = [&](double x, double y) { return Vec3(x, y, ground_z(options.slope, x)); };
  world.triangles.push_back({g(-e, -e), g(e, -e), g(e, e)});
  world.triangles.push_back({g(-e, -e), g(e, e), g(-e, e)});
  world.ground_triangles = world.triangles.size();

  std::vector<Slot> used;
  const int agents = std::clamp(options.agents, 2, 8);
  for (int a = 0; a < agents; ++a) {
    for (int tries = 0;; ++tries) {
      const double lane = kLanes[rng.index(4)];
      const double x = a == 0 ? 0.0 : rng.uniform(-30, 30);
      if (overlaps(used, lane, x - 2.5, x + 2.5, 4.0) && tries < 100) continue;
      used.push_back({lane, x - 2.5, x + 2.5});
      AgentFrame f;
      f.agent_id = a == 0 ? "ego" : "cav" + std::to_string(a);
      f.role = a == 0 ? AgentRole::ego : AgentRole::cooperative;
      f.pose = ground_pose(options.slope, x, lane + rng.uniform(-0.3, 0.3), lane < 0 ? 0.0 : std::numbers::pi);
      f.sensor = options.sensor;
      scene.frames.push_back(std::move(f));
      break;
    }
  }

  const int cars = options.min_cars + static_cast<int>(rng.index(
                                          static_cast<std::size_t>(options.max_cars - options.min_cars + 1)));
  for (int c = 0, placed = 0; placed < cars && c < 200; ++c) {
    const double lane = kLanes[rng.index(4)];
    const double x = rng.uniform(-75, 75);
    const Vec3 dims(rng.uniform(3.9, 4.8), rng.uniform(1.6, 1.9), rng.uniform(1.4, 1.7));
    if (overlaps(used, lane, x - dims.x() / 2, x + dims.x() / 2, 1.0)) continue;
    used.push_back({lane, x - dims.x() / 2, x + dims.x() / 2});
    const double yaw = (lane < 0 ? 0.0 : std::numbers::pi) + rng.uniform(-2, 2) * kDeg;
    const double y = lane + rng.uniform(-0.3, 0.3);
    const Transform pose = ground_pose(options.slope, x, y, yaw);
    const EntityAsset car = make_proxy_car(dims);
    const auto tris = car.mesh.triangles(pose);
    world.triangles.insert(world.triangles.end(), tris.begin(), tris.end());
    scene.objects.push_back({BBox3D(pose * Vec3(0, 0, dims.z() / 2), dims, yaw), "car" + std::to_string(placed), "car"});
    ++placed;
  }

  if (options.buildings) {
    for (int side : {-1, 1}) {
      for (double x = -80; x < 80; x += rng.uniform(14, 22)) {
        const Vec3 dims(rng.uniform(8, 12), rng.uniform(5, 8), rng.uniform(5, 14));
        const double y = side * (road_half_width + 5 + dims.y() / 2 + rng.uniform(0, 4));
        const BBox3D b(Vec3(x, y, ground_z(options.slope, x) + dims.z() / 2 - 0.5), dims + Vec3(0, 0, 1), 0);
        const auto tris = box_triangles(b);
        world.triangles.insert(world.triangles.end(), tris.begin(), tris.end());
      }
    }
  }

  for (auto& f : scene.frames) {
    IndexSet road;
    f.cloud = render_view(world, f, &road);
    if (options.road_mask) f.road_mask = std::move(road);
  }
  return out;
}

}  // namespace coopscene
