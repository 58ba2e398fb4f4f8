#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "checkers.hpp"
#include "coopscene/operators.hpp"
#include "coopscene/synthetic.hpp"
#include "expect_error.hpp"
#include "synthetic.hpp"

using namespace coopscene;
using namespace coopscene::testing;

namespace {

constexpr double kDeg = std::numbers::pi / 180;

Scene empty_road_scene(std::uint64_t seed) {
  SyntheticOptions o = fast_options(seed);
  o.min_cars = o.max_cars = 0;
  o.buildings = false;
  return make_synthetic_scene(o);
}

std::size_t unchanged_objects(const Scene& before, const Scene& after) {
  std::size_t n = 0;
  for (const auto& o : before.objects) {
    const auto i = after.find_object(o.object_id);
    if (i && after.objects[*i] == o) ++n;
  }
  return n;
}

}  // namespace

TEST(RoadExtraction, MaskIsReturnedVerbatim) {
  const Scene s = make_synthetic_scene(fast_options(1));
  const AgentFrame& f = s.frames[0];
  ASSERT_TRUE(f.road_mask);
  EXPECT_EQ(extract_road_indices(f), *f.road_mask);
  const PointCloud road = extract_road(f, f.road_mask);
  EXPECT_EQ(road, subset(f.cloud, *f.road_mask));
}

TEST(RoadExtraction, PlaneFitFindsFlatGround) {
  // flat ground plus objects hovering above it
  SyntheticWorld world;
  const double h = 200;
  world.triangles = {{Vec3(-h, -h, 0), Vec3(h, -h, 0), Vec3(h, h, 0)}, {Vec3(-h, -h, 0), Vec3(h, h, 0), Vec3(-h, h, 0)}};
  world.ground_triangles = 2;
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> xy(-40, 40), lift(0.5, 2.0), size(1, 6);
  for (int i = 0; i < 25; ++i) {
    const double l = size(gen), w = size(gen), z = lift(gen);
    const BBox3D box(Vec3(xy(gen), xy(gen), z + 1), l, w, 2, xy(gen));
    const auto tris = box_triangles(box);
    world.triangles.insert(world.triangles.end(), tris.begin(), tris.end());
  }
  const Scene base = make_synthetic_scene(fast_options(2));
  for (AgentFrame f : base.frames) {
    f.pose = Transform::FromYaw(f.pose.yaw(), Vec3(f.pose.translation().x(), f.pose.translation().y(), 0));
    f.cloud = render_view(world, f, nullptr);
    f.road_mask.reset();
    const PointCloud road = extract_road(f, std::nullopt);
    ASSERT_GT(road.size(), 100u);
    std::size_t flat = 0;
    for (const auto& p : road.points) flat += std::abs(p.position.z()) < 0.1 ? 1 : 0;
    EXPECT_GE(static_cast<double>(flat), 0.99 * static_cast<double>(road.size())) << f.agent_id;
  }
}

TEST(RoadExtraction, AllElevatedHasNoRoad) {
  AgentFrame f;
  f.agent_id = "ego";
  f.role = AgentRole::ego;
  f.sensor = SensorConfig::vlp32();
  for (int i = 0; i < 200; ++i) f.cloud.push_back({5.0 + i * 0.1, std::sin(i) * 3, 3.0 + 0.01 * i}, 0.5);
  EXPECT_ERRC(extract_road_indices(f), Errc::no_road_found);
}

TEST(RoadIndex, LatticeCellInvertsBeamDirection) {
  const SensorConfig s = fast_sensor();
  for (std::size_t b = 0; b < s.beam_elevations.size(); b += 3) {
    for (std::size_t k = 0; k < s.azimuth_count(); k += 37) {
      const Vec3 p = s.origin() + 12.5 * beam_direction(s.beam_elevations[b], static_cast<double>(k) * s.azimuth_step);
      EXPECT_EQ(lattice_cell(s, p), std::make_pair(b, k));
    }
  }
}

TEST(ValidLocations, EmptyRoadGivesNothing) {
  Scene s = make_synthetic_scene(fast_options(3));
  for (auto& f : s.frames) f.road_mask = IndexSet{};
  EXPECT_TRUE(valid_locations(s, make_proxy_car(), 0).empty());
}

TEST(ValidLocations, OpenRoadIsUnoccluded) {
  const Scene s = empty_road_scene(4);
  const auto locs = valid_locations(s, make_proxy_car(), 0.0);
  ASSERT_GT(locs.size(), 50u);
  for (const auto& l : locs) {
    for (double r : l.occlusion_rates) EXPECT_EQ(r, 0.0);
    EXPECT_NEAR(l.position.z(), 0, 0.05);
  }
  for (std::size_t i = 1; i < locs.size(); ++i) {
    const auto& a = locs[i - 1].position;
    const auto& b = locs[i].position;
    EXPECT_TRUE(a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()));
  }
}

TEST(ValidLocations, EveryLocationPassesTheIndependentChecker) {
  const OperatorConfig config;
  for (std::uint64_t seed : {5, 6, 7}) {
    const Scene s = make_synthetic_scene(fast_options(seed));
    const EntityAsset car = make_proxy_car();
    const auto locs = valid_locations(s, car, 0.3, config, 2);
    ASSERT_FALSE(locs.empty());
    const std::size_t stride = std::max<std::size_t>(1, locs.size() / 30);
    for (std::size_t i = 0; i < locs.size(); i += stride) {
      const auto& l = locs[i];
      const auto verdict = check_placement_independently(s, l.box(car.canonical_dims), config);
      EXPECT_TRUE(verdict.ok()) << "(" << l.position.x() << ", " << l.position.y() << "): " << verdict.detail;
    }
  }
}

TEST(ValidLocations, CellsUnderExistingObjectsAreExcluded) {
  const Scene s = make_synthetic_scene(fast_options(7));
  ASSERT_FALSE(s.objects.empty());
  const EntityAsset car = make_proxy_car();
  const auto locs = valid_locations(s, car, s.objects[0].box.yaw());
  for (const auto& l : locs) {
    for (const auto& o : s.objects) EXPECT_FALSE(footprints_overlap(l.box(car.canonical_dims), o.box));
  }
  // a spot directly on the first object fails the check on collision
  const RoadIndex roads(s, {});
  const auto check = check_placement(s, roads, s.objects[0].box, {});
  EXPECT_FALSE(check.collision_free && check.on_road);
}

TEST(ValidLocations, WorkerCountDoesNotMatter) {
  const Scene s = make_synthetic_scene(fast_options(8));
  const auto a = valid_locations(s, make_proxy_car(), 0.0, {}, 1);
  const auto b = valid_locations(s, make_proxy_car(), 0.0, {}, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].position, b[i].position);
    EXPECT_EQ(a[i].occlusion_rates, b[i].occlusion_rates);
  }
}

TEST(Insert, AddsOneConsistentBox) {
  const Scene s = make_synthetic_scene(fast_options(9));
  const EntityAsset car = make_proxy_car();
  Rng rng(1);
  const auto loc = sample_valid_location(s, car, choose_insertion_yaw(s, rng), rng);
  ASSERT_TRUE(loc);
  const OperatorResult r = insert(s, car, *loc, 42);
  ASSERT_EQ(r.scene.objects.size(), s.objects.size() + 1);
  EXPECT_EQ(unchanged_objects(s, r.scene), s.objects.size());
  const auto& added = r.scene.objects.back();
  EXPECT_EQ(added.object_id, "ins0");
  EXPECT_EQ(added.box.dims(), car.canonical_dims);
  EXPECT_EQ(perspective_violations(r.scene, r.edits, added.box), 0u);
  EXPECT_TRUE(check_placement_independently(s, added.box).ok());
  EXPECT_EQ(r.record.kind, OperatorKind::insertion);
  EXPECT_EQ(r.record.params.at("x"), loc->position.x());
  EXPECT_EQ(r.record.params.at("yaw"), loc->yaw);
  EXPECT_NO_THROW(validate_scene(r.scene));
}

TEST(Insert, MergesRenderedMinusCulledAgainstOracles) {
  const Scene s = make_synthetic_scene(fast_options(10));
  const EntityAsset car = make_proxy_car();
  const auto locs = valid_locations(s, car, 0.0);
  ASSERT_FALSE(locs.empty());
  const auto& loc = locs[locs.size() / 2];
  const OperatorResult r = insert(s, car, loc, 0);
  const Transform entity_pose = Transform::FromYaw(loc.yaw, loc.position);
  for (std::size_t v = 0; v < s.frames.size(); ++v) {
    const AgentFrame& f = s.frames[v];
    const auto entity_tris = car.mesh.triangles(f.pose.inverse() * entity_pose);
    IndexSet shadowed;
    for (std::size_t i = 0; i < f.cloud.size(); ++i) {
      if (segment_blocked(f.sensor.origin(), f.cloud[i].position, entity_tris)) shadowed.push_back(i);
    }
    EXPECT_EQ(r.edits[v].removed, shadowed) << f.agent_id;

    std::vector<Triangle> occluders;
    for (const auto& o : s.objects) {
      const BBox3D local = s.box_in_view(o.box, v);
      if (inside_box(f.sensor.origin(), local, 0)) continue;
      const auto t = cuboid(local);
      occluders.insert(occluders.end(), t.begin(), t.end());
    }
    PointCloud expected = without(f.cloud, shadowed);
    for (const auto& p : render_entity(f.sensor, f.pose, car, entity_pose).points) {
      if (!segment_blocked(f.sensor.origin(), p.position, occluders)) expected.push_back(p.position, 0.5);
    }
    EXPECT_EQ(r.scene.frames[v].cloud, expected) << f.agent_id;
  }
}

TEST(Insert, FarAwayLocationIsRejected) {
  const Scene s = make_synthetic_scene(fast_options(11));
  CandidateLocation far;
  far.position = Vec3(500, 0, 0);
  EXPECT_ERRC(insert(s, make_proxy_car(), far, 0), Errc::invalid_location);
}

TEST(Insert, IsDeterministic) {
  const Scene s = make_synthetic_scene(fast_options(12));
  const EntityAsset car = make_proxy_car();
  Rng a(5), b(5);
  const auto la = sample_valid_location(s, car, 0.0, a);
  const auto lb = sample_valid_location(s, car, 0.0, b);
  ASSERT_TRUE(la && lb);
  EXPECT_EQ(la->position, lb->position);
  EXPECT_EQ(insert(s, car, *la, 3).scene, insert(s, car, *lb, 3).scene);
}

TEST(Delete, RemovesBoxPointsAndCompletesGroundInTheWedge) {
  for (std::uint64_t seed : {13, 14, 15}) {
    const auto syn = make_synthetic(fast_options(seed));
    const Scene& s = syn.scene;
    for (const auto& target : s.objects) {
      const OperatorResult r = delete_object(s, target.object_id);
      ASSERT_EQ(r.scene.objects.size(), s.objects.size() - 1);
      EXPECT_FALSE(r.scene.find_object(target.object_id));
      EXPECT_EQ(unchanged_objects(s, r.scene), s.objects.size() - 1);
      for (std::size_t v = 0; v < s.frames.size(); ++v) {
        const AgentFrame& f = r.scene.frames[v];
        EXPECT_TRUE(points_in_box(quantized(f.cloud), r.scene.box_in_view(target.box, v)).empty());
        const Vec3 origin = f.sensor_origin_world();
        const auto& e = r.edits[v];
        for (std::size_t i = e.ground_begin; i < e.ground_end; ++i) {
          const Vec3 w = f.pose * f.cloud[i].position;
          EXPECT_NEAR(w.z(), ground_z(syn.world.slope, w.x()), 0.05);
          EXPECT_TRUE(segment_hits_box(origin, w, target.box)) << target.object_id << " view " << v;
        }
        for (std::size_t i = e.refill_begin; i < e.refill_end; ++i) {
          EXPECT_TRUE(segment_hits_box(origin, f.pose * f.cloud[i].position, target.box));
        }
      }
    }
  }
}

TEST(Delete, ObjectWithoutPointsOnlyGainsGround) {
  Scene s = make_synthetic_scene(fast_options(16));
  s.objects.push_back({BBox3D(Vec3(400, 0, 0.75), 4.5, 1.8, 1.5, 0), "ghost", "car"});
  const OperatorResult r = delete_object(s, "ghost");
  EXPECT_EQ(r.scene.objects.size(), s.objects.size() - 1);
  for (std::size_t v = 0; v < s.frames.size(); ++v) {
    EXPECT_TRUE(r.edits[v].removed.empty());
    EXPECT_EQ(r.edits[v].refill_begin, r.edits[v].refill_end);
    EXPECT_EQ(r.scene.frames[v].cloud.size(), s.frames[v].cloud.size() + r.edits[v].ground_end - r.edits[v].ground_begin);
  }
}

TEST(Delete, UnknownIdFails) {
  const Scene s = make_synthetic_scene(fast_options(17));
  EXPECT_ERRC(delete_object(s, "nope"), Errc::unknown_object);
}

TEST(Composite, ParameterRanges) {
  const Scene s = make_synthetic_scene(fast_options(18));
  const std::string id = s.objects.at(0).object_id;
  EXPECT_ERRC(scale(s, id, 1.2, 1, 1), Errc::invalid_parameter);
  EXPECT_ERRC(scale(s, id, 1, 0.89, 1), Errc::invalid_parameter);
  EXPECT_ERRC(rotate(s, id, 3 * kDeg), Errc::invalid_parameter);
  EXPECT_ERRC(rotate(s, id, -31 * kDeg), Errc::invalid_parameter);
  EXPECT_ERRC(translate(s, id, 8.5, 0), Errc::invalid_parameter);
  EXPECT_ERRC(rotate(s, "nope", 10 * kDeg), Errc::unknown_object);
}

TEST(Composite, IdentityScaleRotateAndTranslate) {
  int scaled = 0, rotated = 0, moved = 0;
  for (std::uint64_t seed = 20; seed < 32 && (scaled == 0 || rotated == 0 || moved == 0); ++seed) {
    const auto syn = make_synthetic(fast_options(seed));
    const Scene& s = syn.scene;
    for (const auto& o : s.objects) {
      auto attempt = [&](auto&& op, auto&& verify) -> bool {
        try {
          const OperatorResult r = op();
          const auto i = r.scene.find_object(o.object_id);
          if (!i) {
            ADD_FAILURE() << o.object_id << " vanished";
            return false;
          }
          EXPECT_EQ(r.scene.objects.size(), s.objects.size());
          EXPECT_GE(unchanged_objects(s, r.scene), s.objects.size() - 1);
          EXPECT_EQ(perspective_violations(r.scene, r.edits, r.scene.objects[*i].box), 0u);
          verify(r.scene.objects[*i].box);
          return true;
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), Errc::invalid_target_pose) << e.what();
          return false;
        }
      };
      scaled += attempt([&] { return scale(s, o.object_id, 1, 1, 1); },
                        [&](const BBox3D& b) { EXPECT_EQ(b.dims(), o.box.dims()); });
      rotated += attempt([&] { return rotate(s, o.object_id, 10 * kDeg); }, [&](const BBox3D& b) {
        EXPECT_NEAR(std::remainder(b.yaw() - o.box.yaw() - 10 * kDeg, 2 * std::numbers::pi), 0, 1e-12);
        EXPECT_EQ(b.center(), o.box.center());
      });
      const double tx = o.box.yaw() > 1 ? -2 : 2;  // forward along the lane
      moved += attempt([&] { return translate(s, o.object_id, tx, 0); }, [&](const BBox3D& b) {
        EXPECT_NEAR(b.center().x(), o.box.center().x() + tx, 1e-12);
        EXPECT_NEAR(b.center().y(), o.box.center().y(), 1e-12);
        EXPECT_NEAR(b.base().z(), ground_z(syn.world.slope, b.center().x()), 0.05);
      });
    }
  }
  EXPECT_GT(scaled, 0);
  EXPECT_GT(rotated, 0);
  EXPECT_GT(moved, 0);
}

TEST(Composite, TranslateSnapsToSlopedGround) {
  int moved = 0;
  for (std::uint64_t seed = 40; seed < 52 && moved < 2; ++seed) {
    SyntheticOptions o = fast_options(seed);
    o.slope = 0.03;
    const auto syn = make_synthetic(o);
    for (const auto& obj : syn.scene.objects) {
      try {
        const auto r = translate(syn.scene, obj.object_id, -3, 0.5);
        const auto& b = r.scene.objects[*r.scene.find_object(obj.object_id)].box;
        EXPECT_NEAR(b.base().z(), ground_z(o.slope, b.center().x()), 0.05);
        EXPECT_NEAR(r.record.params.at("z"), b.base().z(), 1e-12);
        ++moved;
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_target_pose);
      }
    }
  }
  EXPECT_GT(moved, 0);
}

TEST(InsertionYaw, FollowsTheDominantHeading) {
  const Scene s = make_synthetic_scene(fast_options(60));
  ASSERT_GE(s.objects.size(), 3u);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const double yaw = choose_insertion_yaw(s, rng);
    EXPECT_NEAR(std::abs(std::sin(yaw)), 0, 0.1) << yaw;  // synthetic cars run along x
  }
}
