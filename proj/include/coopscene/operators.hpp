#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "coopscene/lidar.hpp"
#include "coopscene/mesh.hpp"
#include "coopscene/rng.hpp"
#include "coopscene/scene.hpp"
#include "coopscene/scene_io.hpp"

namespace coopscene {

/// Tunables shared by all operators. Defaults are the documented values.
struct OperatorConfig {
  // Road extraction fallback (RANSAC plane fit) when a frame has no mask.
  int ransac_iterations = 200;
  double ransac_inlier_threshold = 0.15;
  std::uint64_t ransac_seed = 0x5eed;
  double ransac_max_tilt_deg = 15;
  double ransac_max_ground_offset = 1.0;  // |plane z at the local origin|

  // Candidate insertion locations.
  double grid_step = 0.5;
  double road_neighborhood = 1.0;
  double footprint_sample_step = 0.25;
  double max_occlusion = 0.9;
  /// Footprint kept clear around every sensor-carrying agent.
  Vec3 agent_footprint = Vec3(4.5, 2.0, 1.6);

  // Parameter ranges.
  double scale_min = 0.9;
  double scale_max = 1.1;
  double rotation_min_deg = 5;
  double rotation_max_deg = 30;
  double max_translation = 8;

  double intensity = 0.5;
  Vec3 proxy_dims = Vec3(4.5, 1.8, 1.5);
};

/// Returns the road points of a frame: the mask when present, otherwise the
/// inliers of the best near-horizontal plane near the ground found by RANSAC
/// over points below the sensor. Throws no_road_found.
IndexSet extract_road_indices(const AgentFrame& frame, const OperatorConfig& config = {});
PointCloud extract_road(const AgentFrame& frame, const std::optional<IndexSet>& mask,
                        const OperatorConfig& config = {});

/// Insertion spot: `position` is the world-frame point on the ground under
/// the box center. occlusion_rates has one entry per scene frame.
struct CandidateLocation {
  Vec3 position = Vec3::Zero();
  double yaw = 0;
  std::vector<double> occlusion_rates;

  /// Box an object of the given dims occupies at this location.
  BBox3D box(const Vec3& dims) const;
};

/// Road geometry of a whole scene, in the world frame, prepared once for many
/// location queries. A view's road surface is the union of the 1 m
/// neighborhoods of its road returns and of the scan-lattice triangles whose
/// three corners are adjacent road returns (neighboring beams and azimuths),
/// which bridges the gaps between scan rings.
class RoadIndex {
 public:
  RoadIndex(const Scene& scene, const OperatorConfig& config);

  std::size_t view_count() const { return views_.size(); }
  /// True if some road point of `view` lies within the neighborhood radius
  /// (ground plane distance) of xy.
  bool near_road(std::size_t view, const Vec2& xy) const;
  /// True if xy lies on a road lattice triangle of `view`.
  bool on_lattice(std::size_t view, const Vec2& xy) const;
  bool on_road(std::size_t view, const Vec2& xy) const {
    return near_road(view, xy) || on_lattice(view, xy) || in_vacated(xy);
  }
  /// Marks the footprint of a removed object, with the same neighborhood as a
  /// road return, as road in every view: nothing scanned the ground it stood
  /// on.
  void add_vacated(const BBox3D& box) { vacated_.push_back(box); }
  bool in_vacated(const Vec2& xy) const { return vacated_at(xy) != nullptr; }
  /// Mean world z of the road points of all views within the neighborhood;
  /// failing that, the mean lattice-interpolated height, then the base of a
  /// vacated footprint; empty when xy is off every view's road.
  std::optional<double> ground_height(const Vec2& xy) const;
  /// World-frame ground-plane bounds common to all views (lo, hi).
  std::optional<std::pair<Vec2, Vec2>> common_bounds() const;
  const std::vector<Vec3>& road_points(std::size_t view) const { return views_[view].points; }
  const std::vector<Triangle>& road_triangles(std::size_t view) const { return views_[view].triangles; }

 private:
  struct View {
    std::vector<Vec3> points;
    std::vector<Triangle> triangles;
    Vec2 lo, hi;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> triangle_cells;
  };
  std::uint64_t cell_key(const Vec2& xy) const;
  std::optional<double> lattice_height(const View& view, const Vec2& xy) const;
  const BBox3D* vacated_at(const Vec2& xy) const;

  double radius_;
  std::vector<View> views_;
  std::vector<BBox3D> vacated_;
};

/// Lattice cell (beam, azimuth index) of a point in its agent-local frame:
/// nearest beam elevation and nearest azimuth step.
std::pair<std::size_t, std::size_t> lattice_cell(const SensorConfig& sensor, const Vec3& local_point);

/// Road lattice triangles of a frame in its local frame: for every pair of
/// adjacent beams and azimuths whose four cells hold road returns, the quad
/// split along its (b, k) - (b+1, k+1) diagonal; quads with three road corners
/// contribute that one triangle.
std::vector<Triangle> road_lattice(const AgentFrame& frame, const IndexSet& road);

/// Outcome of checking one placement against the insertion safety triple.
struct LocationCheck {
  bool on_road = false;  // (a) footprint on the road surface of every view
  bool collision_free = false;  // (b) zero BEV IoU with every background box in every view
  bool visible_to_cooperative = false;  // (c) occlusion < max from at least one cooperative frame
  std::vector<double> occlusion_rates;

  bool valid() const { return on_road && collision_free && visible_to_cooperative; }
};

/// Checks `box` (world frame) against the scene. Boxes with ids listed in
/// exclude_ids are not background. Occlusion is only evaluated when (a) and
/// (b) hold.
LocationCheck check_placement(const Scene& scene, const RoadIndex& roads, const BBox3D& box,
                              const OperatorConfig& config, std::span<const std::string> exclude_ids = {});

/// Every grid cell (0.5 m, aligned to the world origin) satisfying the triple
/// for `asset` at `yaw`, ordered lexicographically by (x, y).
std::vector<CandidateLocation> valid_locations(const Scene& scene, const EntityAsset& asset, double yaw,
                                               const OperatorConfig& config = {}, int workers = 1);

/// A uniformly chosen valid location, testing shuffled grid cells lazily.
std::optional<CandidateLocation> sample_valid_location(const Scene& scene, const EntityAsset& asset, double yaw,
                                                       Rng& rng, const OperatorConfig& config = {});

/// Heading for a new entity: the dominant background heading (5 degree bins,
/// modulo pi) or its reverse, chosen by rng; uniform when the scene is empty.
double choose_insertion_yaw(const Scene& scene, Rng& rng);

/// Per-view bookkeeping of what an operator changed. Index ranges refer to
/// the output cloud of that view.
struct ViewEdit {
  IndexSet removed;  // indices into the input cloud
  std::size_t kept = 0;  // output [0, kept) are surviving input points
  std::size_t entity_begin = 0, entity_end = 0;  // rendered entity points
  std::size_t ground_begin = 0, ground_end = 0;  // ground completion points
  std::size_t refill_begin = 0, refill_end = 0;  // re-rendered shadowed objects
};

struct OperatorResult {
  Scene scene;
  std::vector<ViewEdit> edits;  // one per frame; composites report the insertion edits
  OperatorRecord record;
};

/// Renders the asset into every view with mutual occlusion handling and adds
/// its GT box. `object_id` defaults to a fresh "ins<k>". Throws
/// invalid_location when the location fails re-validation or no view sees the
/// entity.
OperatorResult insert(const Scene& scene, const EntityAsset& asset, const CandidateLocation& location,
                      std::uint64_t rng_seed, const OperatorConfig& config = {}, std::string object_id = {});

/// Removes the object's points in every view, completes the ground and any
/// shadowed background objects, and drops its GT box. Throws unknown_object.
OperatorResult delete_object(const Scene& scene, std::string_view object_id, const OperatorConfig& config = {},
                             std::uint64_t rng_seed = 0);

/// Composites: delete, then insert a proxy vehicle matched to the new box.
/// Throw unknown_object, invalid_parameter (out of range), or
/// invalid_target_pose (new pose fails the insertion checks).
OperatorResult scale(const Scene& scene, std::string_view object_id, double sx, double sy, double sz,
                     const OperatorConfig& config = {}, std::uint64_t rng_seed = 0);
OperatorResult rotate(const Scene& scene, std::string_view object_id, double rot,
                      const OperatorConfig& config = {}, std::uint64_t rng_seed = 0);
OperatorResult translate(const Scene& scene, std::string_view object_id, double tx, double ty,
                         const OperatorConfig& config = {}, std::uint64_t rng_seed = 0);

}  // namespace coopscene
