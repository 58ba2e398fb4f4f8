#include "coopscene/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coopscene/error.hpp"
#include "coopscene/parallel.hpp"

namespace coopscene {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180;

}  // namespace

IndexSet extract_road_indices(const AgentFrame& frame, const OperatorConfig& config) {
  if (frame.road_mask) {
    if (frame.road_mask->empty()) throw Error(Errc::no_road_found, "frame '" + frame.agent_id + "': empty road mask");
    return *frame.road_mask;
  }
  const auto& pts = frame.cloud.points;
  std::vector<std::size_t> low;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].position.z() < frame.sensor.sensor_origin_height) low.push_back(i);
  }
  if (low.size() < 3) {
    throw Error(Errc::no_road_found, "frame '" + frame.agent_id + "': too few points below the sensor");
  }

  Rng rng(config.ransac_seed);
  const double min_nz = std::cos(config.ransac_max_tilt_deg * kDeg);
  std::size_t best_count = 0;
  Vec3 best_normal = Vec3::UnitZ();
  double best_offset = 0;
  for (int it = 0; it < config.ransac_iterations; ++it) {
    const std::size_t a = rng.index(low.size());
    const std::size_t b = rng.index(low.size());
    const std::size_t c = rng.index(low.size());
    if (a == b || b == c || a == c) continue;
    const Vec3& p0 = pts[low[a]].position;
    Vec3 n = (pts[low[b]].position - p0).cross(pts[low[c]].position - p0);
    const double len = n.norm();
    if (!(len > 1e-12)) continue;
    n /= len;
    if (n.z() < 0) n = -n;
    if (n.z() < min_nz) continue;
    const double offset = n.dot(p0);
    if (std::abs(offset / n.z()) > config.ransac_max_ground_offset) continue;
    std::size_t count = 0;
    for (std::size_t i : low) count += std::abs(n.dot(pts[i].position) - offset) <= config.ransac_inlier_threshold;
    if (count > best_count) {
      best_count = count;
      best_normal = n;
      best_offset = offset;
    }
  }
  if (best_count < 3) {
    throw Error(Errc::no_road_found, "frame '" + frame.agent_id + "': no near-horizontal ground plane found");
  }
  IndexSet out;
  for (std::size_t i : low) {
    if (std::abs(best_normal.dot(pts[i].position) - best_offset) <= config.ransac_inlier_threshold) out.push_back(i);
  }
  return out;
}

PointCloud extract_road(const AgentFrame& frame, const std::optional<IndexSet>& mask, const OperatorConfig& config) {
  if (mask) {
    if (mask->empty()) throw Error(Errc::no_road_found, "frame '" + frame.agent_id + "': empty road mask");
    for (std::size_t i : *mask) {
      if (i >= frame.cloud.size()) throw Error(Errc::invariant_violation, "road mask index out of range");
    }
    return subset(frame.cloud, *mask);
  }
  AgentFrame unmasked = frame;
  unmasked.road_mask.reset();
  return subset(frame.cloud, extract_road_indices(unmasked, config));
}

BBox3D CandidateLocation::box(const Vec3& dims) const {
  return BBox3D(position + Vec3(0, 0, dims.z() / 2), dims, yaw);
}

// RoadIndex ----------------------------------------------------------------

std::pair<std::size_t, std::size_t> lattice_cell(const SensorConfig& sensor, const Vec3& local_point) {
  const Vec3 rel = local_point - sensor.origin();
  const double range = rel.norm();
  const double elevation = range > 0 ? std::asin(std::clamp(rel.z() / range, -1.0, 1.0)) : 0.0;
  const auto& beams = sensor.beam_elevations;
  auto beam = static_cast<std::size_t>(std::lower_bound(beams.begin(), beams.end(), elevation) - beams.begin());
  if (beam == beams.size() || (beam > 0 && elevation - beams[beam - 1] < beams[beam] - elevation)) --beam;
  const auto n = static_cast<long long>(sensor.azimuth_count());
  const long long az = std::llround(std::atan2(rel.y(), rel.x()) / sensor.azimuth_step);
  return {beam, static_cast<std::size_t>(((az % n) + n) % n)};
}

std::vector<Triangle> road_lattice(const AgentFrame& frame, const IndexSet& road) {
  const std::size_t azimuths = frame.sensor.azimuth_count();
  std::unordered_map<std::uint64_t, std::uint32_t> cell_point;
  auto key = [&](std::size_t beam, std::size_t az) { return static_cast<std::uint64_t>(beam) * azimuths + az; };
  for (std::size_t i : road) {
    const auto [beam, az] = lattice_cell(frame.sensor, frame.cloud[i].position);
    cell_point.emplace(key(beam, az), static_cast<std::uint32_t>(i));
  }
  // Quads are visited in (beam, azimuth) order so the output is deterministic.
  std::vector<std::uint64_t> keys;
  keys.reserve(cell_point.size());
  for (const auto& [k, i] : cell_point) keys.push_back(k);
  std::sort(keys.begin(), keys.end());

  std::vector<Triangle> out;
  for (std::uint64_t k : keys) {
    const std::size_t beam = k / azimuths, az = k % azimuths;
    if (beam + 1 >= frame.sensor.beam_elevations.size()) continue;
    const std::size_t next = (az + 1) % azimuths;
    auto at = [&](std::size_t b, std::size_t a) -> const Vec3* {
      const auto it = cell_point.find(key(b, a));
      return it == cell_point.end() ? nullptr : &frame.cloud[it->second].position;
    };
    const Vec3* a = at(beam, az);
    const Vec3* b = at(beam, next);
    const Vec3* c = at(beam + 1, az);
    const Vec3* d = at(beam + 1, next);
    if (b && d) out.push_back({*a, *b, *d});
    if (c && d) out.push_back({*a, *d, *c});
    if (!d && b && c) out.push_back({*a, *b, *c});
  }
  // Quads whose (b, k) corner is missing but whose other three are present.
  for (std::uint64_t k : keys) {
    const std::size_t beam = k / azimuths, az = k % azimuths;
    if (beam == 0) continue;
    const std::size_t prev = (az + azimuths - 1) % azimuths;
    if (cell_point.count(key(beam - 1, prev))) continue;
    const auto b = cell_point.find(key(beam - 1, az));
    const auto c = cell_point.find(key(beam, prev));
    if (b == cell_point.end() || c == cell_point.end()) continue;
    out.push_back({frame.cloud[b->second].position, frame.cloud[cell_point.at(k)].position,
                   frame.cloud[c->second].position});
  }
  return out;
}

namespace {

bool in_triangle_xy(const Triangle& t, const Vec2& p) {
  const Vec2 a = t[0].head<2>(), b = t[1].head<2>(), c = t[2].head<2>();
  const double d1 = detail::cross2<double>(b - a, p - a);
  const double d2 = detail::cross2<double>(c - b, p - b);
  const double d3 = detail::cross2<double>(a - c, p - c);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
  const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(neg && pos);
}

std::optional<double> interpolate_z(const Triangle& t, const Vec2& p) {
  const Vec2 a = t[0].head<2>(), b = t[1].head<2>(), c = t[2].head<2>();
  const double area = detail::cross2<double>(b - a, c - a);
  if (std::abs(area) < 1e-12) return std::nullopt;
  const double wa = detail::cross2<double>(b - p, c - p) / area;
  const double wb = detail::cross2<double>(c - p, a - p) / area;
  const double wc = 1 - wa - wb;
  return wa * t[0].z() + wb * t[1].z() + wc * t[2].z();
}

}  // namespace

RoadIndex::RoadIndex(const Scene& scene, const OperatorConfig& config) : radius_(config.road_neighborhood) {
  views_.resize(scene.frames.size());
  for (std::size_t v = 0; v < scene.frames.size(); ++v) {
    const auto& frame = scene.frames[v];
    IndexSet road;
    try {
      road = extract_road_indices(frame, config);
    } catch (const Error& e) {
      if (e.code() != Errc::no_road_found) throw;
    }
    View& view = views_[v];
    view.lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    view.hi = Vec2::Constant(-std::numeric_limits<double>::infinity());
    view.points.reserve(road.size());
    for (std::size_t i : road) {
      const Vec3 p = frame.pose * frame.cloud[i].position;
      view.lo = view.lo.cwiseMin(p.head<2>());
      view.hi = view.hi.cwiseMax(p.head<2>());
      view.cells[cell_key(p.head<2>())].push_back(static_cast<std::uint32_t>(view.points.size()));
      view.points.push_back(p);
    }
    for (const auto& t : road_lattice(frame, road)) {
      const Triangle w{frame.pose * t[0], frame.pose * t[1], frame.pose * t[2]};
      const auto index = static_cast<std::uint32_t>(view.triangles.size());
      view.triangles.push_back(w);
      Vec2 lo = w[0].head<2>().cwiseMin(w[1].head<2>()).cwiseMin(w[2].head<2>());
      Vec2 hi = w[0].head<2>().cwiseMax(w[1].head<2>()).cwiseMax(w[2].head<2>());
      const auto x0 = static_cast<long long>(std::floor(lo.x() / radius_));
      const auto x1 = static_cast<long long>(std::floor(hi.x() / radius_));
      const auto y0 = static_cast<long long>(std::floor(lo.y() / radius_));
      const auto y1 = static_cast<long long>(std::floor(hi.y() / radius_));
      for (long long x = x0; x <= x1; ++x) {
        for (long long y = y0; y <= y1; ++y) {
          view.triangle_cells[cell_key(Vec2((static_cast<double>(x) + 0.5) * radius_,
                                            (static_cast<double>(y) + 0.5) * radius_))]
              .push_back(index);
        }
      }
    }
  }
}

std::uint64_t RoadIndex::cell_key(const Vec2& xy) const {
  const auto ix = static_cast<std::int64_t>(std::floor(xy.x() / radius_));
  const auto iy = static_cast<std::int64_t>(std::floor(xy.y() / radius_));
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) | static_cast<std::uint32_t>(iy);
}

bool RoadIndex::near_road(std::size_t view, const Vec2& xy) const {
  const View& v = views_[view];
  const double r2 = radius_ * radius_;
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      const auto it = v.cells.find(cell_key(xy + Vec2(dx * radius_, dy * radius_)));
      if (it == v.cells.end()) continue;
      for (auto i : it->second) {
        if ((v.points[i].head<2>() - xy).squaredNorm() <= r2) return true;
      }
    }
  }
  return false;
}

bool RoadIndex::on_lattice(std::size_t view, const Vec2& xy) const {
  const View& v = views_[view];
  const auto it = v.triangle_cells.find(cell_key(xy));
  if (it == v.triangle_cells.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](std::uint32_t i) { return in_triangle_xy(v.triangles[i], xy); });
}

std::optional<double> RoadIndex::lattice_height(const View& v, const Vec2& xy) const {
  const auto it = v.triangle_cells.find(cell_key(xy));
  if (it == v.triangle_cells.end()) return std::nullopt;
  for (std::uint32_t i : it->second) {
    if (in_triangle_xy(v.triangles[i], xy)) {
      if (auto z = interpolate_z(v.triangles[i], xy)) return z;
    }
  }
  return std::nullopt;
}

const BBox3D* RoadIndex::vacated_at(const Vec2& xy) const {
  for (const auto& b : vacated_) {
    const Vec2 d = xy - b.center().head<2>();
    const double c = std::cos(b.yaw()), s = std::sin(b.yaw());
    const double gx = std::max(std::abs(c * d.x() + s * d.y()) - b.length() / 2, 0.0);
    const double gy = std::max(std::abs(-s * d.x() + c * d.y()) - b.width() / 2, 0.0);
    if (gx * gx + gy * gy <= radius_ * radius_) return &b;
  }
  return nullptr;
}

std::optional<double> RoadIndex::ground_height(const Vec2& xy) const {
  const double r2 = radius_ * radius_;
  double sum = 0;
  std::size_t count = 0;
  for (const View& v : views_) {
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        const auto it = v.cells.find(cell_key(xy + Vec2(dx * radius_, dy * radius_)));
        if (it == v.cells.end()) continue;
        for (auto i : it->second) {
          if ((v.points[i].head<2>() - xy).squaredNorm() <= r2) {
            sum += v.points[i].z();
            ++count;
          }
        }
      }
    }
  }
  if (count > 0) return sum / static_cast<double>(count);
  for (const View& v : views_) {
    if (const auto z = lattice_height(v, xy)) {
      sum += *z;
      ++count;
    }
  }
  if (count > 0) return sum / static_cast<double>(count);
  if (const BBox3D* b = vacated_at(xy)) return b->base().z();
  return std::nullopt;
}

std::optional<std::pair<Vec2, Vec2>> RoadIndex::common_bounds() const {
  if (views_.empty()) return std::nullopt;
  Vec2 lo = Vec2::Constant(-std::numeric_limits<double>::infinity());
  Vec2 hi = Vec2::Constant(std::numeric_limits<double>::infinity());
  for (const View& v : views_) {
    if (v.points.empty()) return std::nullopt;
    lo = lo.cwiseMax(v.lo);
    hi = hi.cwiseMin(v.hi);
  }
  if (lo.x() > hi.x() || lo.y() > hi.y()) return std::nullopt;
  return std::make_pair(lo, hi);
}

// Placement checks ---------------------------------------------------------

namespace {

bool excluded(std::span<const std::string> ids, const std::string& id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// Occluders seen from each frame's sensor, in the world frame.
std::vector<MeshBVH> frame_occluders(const Scene& scene, std::span<const std::string> exclude_ids) {
  std::vector<MeshBVH> out;
  out.reserve(scene.frames.size());
  for (const auto& f : scene.frames) out.push_back(world_occluders(scene, f.sensor_origin_world(), exclude_ids));
  return out;
}

std::vector<Vec2> footprint_samples(const BBox3D& box, double step) {
  const int nl = std::max(2, static_cast<int>(std::ceil(box.length() / step)) + 1);
  const int nw = std::max(2, static_cast<int>(std::ceil(box.width() / step)) + 1);
  const double c = std::cos(box.yaw()), s = std::sin(box.yaw());
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(nl * nw));
  for (int i = 0; i < nl; ++i) {
    const double dx = box.length() * (static_cast<double>(i) / (nl - 1) - 0.5);
    for (int j = 0; j < nw; ++j) {
      const double dy = box.width() * (static_cast<double>(j) / (nw - 1) - 0.5);
      out.emplace_back(box.center().x() + c * dx - s * dy, box.center().y() + s * dx + c * dy);
    }
  }
  return out;
}

bool on_road(const RoadIndex& roads, const BBox3D& box, const OperatorConfig& config) {
  const auto samples = footprint_samples(box, config.footprint_sample_step);
  for (std::size_t v = 0; v < roads.view_count(); ++v) {
    for (const auto& s : samples) {
      if (!roads.on_road(v, s)) return false;
    }
  }
  return true;
}

bool collision_free(const Scene& scene, const BBox3D& box, const OperatorConfig& config,
                    std::span<const std::string> exclude_ids) {
  for (const auto& f : scene.frames) {
    const double h = config.agent_footprint.z();
    const BBox3D agent(f.pose * Vec3(0, 0, h / 2), config.agent_footprint, f.pose.yaw());
    if (iou_bev(box, agent) != 0) return false;
  }
  for (std::size_t v = 0; v < scene.frames.size(); ++v) {
    const BBox3D local = scene.box_in_view(box, v);
    for (const auto& o : scene.objects) {
      if (excluded(exclude_ids, o.object_id)) continue;
      if (iou_bev(local, scene.box_in_view(o.box, v)) != 0) return false;
    }
  }
  return true;
}

LocationCheck check_with(const Scene& scene, const RoadIndex& roads, const std::vector<MeshBVH>& occluders,
                         const BBox3D& box, const OperatorConfig& config, std::span<const std::string> exclude_ids) {
  LocationCheck check;
  check.on_road = on_road(roads, box, config);
  if (!check.on_road) return check;
  check.collision_free = collision_free(scene, box, config, exclude_ids);
  if (!check.collision_free) return check;
  check.occlusion_rates.resize(scene.frames.size());
  for (std::size_t v = 0; v < scene.frames.size(); ++v) {
    const auto& f = scene.frames[v];
    check.occlusion_rates[v] = occlusion_rate(f.sensor_origin_world(), box, occluders[v]);
    if (f.role == AgentRole::cooperative && check.occlusion_rates[v] < config.max_occlusion) {
      check.visible_to_cooperative = true;
    }
  }
  return check;
}

std::vector<Vec2> grid_cells(const RoadIndex& roads, double step) {
  std::vector<Vec2> cells;
  const auto bounds = roads.common_bounds();
  if (!bounds) return cells;
  const auto [lo, hi] = *bounds;
  const auto x0 = static_cast<long long>(std::ceil(lo.x() / step));
  const auto x1 = static_cast<long long>(std::floor(hi.x() / step));
  const auto y0 = static_cast<long long>(std::ceil(lo.y() / step));
  const auto y1 = static_cast<long long>(std::floor(hi.y() / step));
  for (long long i = x0; i <= x1; ++i) {
    for (long long j = y0; j <= y1; ++j) cells.emplace_back(static_cast<double>(i) * step, static_cast<double>(j) * step);
  }
  return cells;
}

std::optional<CandidateLocation> try_cell(const Scene& scene, const RoadIndex& roads,
                                          const std::vector<MeshBVH>& occluders, const EntityAsset& asset,
                                          const Vec2& xy, double yaw, const OperatorConfig& config) {
  const auto z = roads.ground_height(xy);
  if (!z) return std::nullopt;
  CandidateLocation loc;
  loc.position = Vec3(xy.x(), xy.y(), *z);
  loc.yaw = yaw;
  auto check = check_with(scene, roads, occluders, loc.box(asset.canonical_dims), config, {});
  if (!check.valid()) return std::nullopt;
  loc.occlusion_rates = std::move(check.occlusion_rates);
  return loc;
}

}  // namespace

LocationCheck check_placement(const Scene& scene, const RoadIndex& roads, const BBox3D& box,
                              const OperatorConfig& config, std::span<const std::string> exclude_ids) {
  return check_with(scene, roads, frame_occluders(scene, exclude_ids), box, config, exclude_ids);
}

std::vector<CandidateLocation> valid_locations(const Scene& scene, const EntityAsset& asset, double yaw,
                                               const OperatorConfig& config, int workers) {
  const RoadIndex roads(scene, config);
  const auto occluders = frame_occluders(scene, {});
  const auto cells = grid_cells(roads, config.grid_step);
  std::vector<std::optional<CandidateLocation>> slots(cells.size());
  parallel_for(cells.size(), workers,
               [&](std::size_t i) { slots[i] = try_cell(scene, roads, occluders, asset, cells[i], yaw, config); });
  std::vector<CandidateLocation> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

std::optional<CandidateLocation> sample_valid_location(const Scene& scene, const EntityAsset& asset, double yaw,
                                                       Rng& rng, const OperatorConfig& config) {
  const RoadIndex roads(scene, config);
  const auto occluders = frame_occluders(scene, {});
  auto cells = grid_cells(roads, config.grid_step);
  rng.shuffle(cells);
  for (const auto& xy : cells) {
    if (auto loc = try_cell(scene, roads, occluders, asset, xy, yaw, config)) return loc;
  }
  return std::nullopt;
}

double choose_insertion_yaw(const Scene& scene, Rng& rng) {
  if (scene.objects.empty()) return normalize_yaw(rng.uniform(-kPi, kPi));
  constexpr int kBins = 36;
  constexpr double kWidth = kPi / kBins;
  std::array<int, kBins> counts{};
  std::array<Vec2, kBins> sums;
  sums.fill(Vec2::Zero());
  for (const auto& o : scene.objects) {
    double y = std::fmod(o.box.yaw(), kPi);
    if (y < 0) y += kPi;
    const int bin = static_cast<int>(std::floor((y + kWidth / 2) / kWidth)) % kBins;
    ++counts[bin];
    sums[bin] += Vec2(std::cos(2 * y), std::sin(2 * y));
  }
  const int best = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  double heading = std::atan2(sums[best].y(), sums[best].x()) / 2;
  if (rng.uniform() < 0.5) heading += kPi;
  return normalize_yaw(heading);
}

// Insertion ----------------------------------------------------------------

namespace {

std::string failed_condition(const LocationCheck& check) {
  if (!check.on_road) return "off road";
  if (!check.collision_free) return "collides";
  return "occluded from every cooperative agent";
}

std::string fresh_object_id(const Scene& scene) {
  for (std::size_t k = 0;; ++k) {
    std::string id = "ins" + std::to_string(k);
    if (!scene.find_object(id)) return id;
  }
}

OperatorResult insert_on(const Scene& scene, const RoadIndex& roads, const EntityAsset& asset,
                         const CandidateLocation& location, std::uint64_t rng_seed, const OperatorConfig& config,
                         std::string object_id) {
  if (object_id.empty()) object_id = fresh_object_id(scene);
  if (scene.find_object(object_id)) {
    throw Error(Errc::invalid_parameter, "object id '" + object_id + "' already exists");
  }
  const BBox3D box = location.box(asset.canonical_dims);
  const auto check = check_placement(scene, roads, box, config);
  if (!check.valid()) {
    throw Error(Errc::invalid_location, "location fails re-validation (" + failed_condition(check) + ")");
  }

  const Transform entity_pose = Transform::FromYaw(location.yaw, location.position);
  OperatorResult result;
  result.scene = scene;
  result.edits.resize(scene.frames.size());
  bool seen = false;
  for (std::size_t v = 0; v < scene.frames.size(); ++v) {
    const AgentFrame& frame = scene.frames[v];
    const Vec3 origin = frame.sensor.origin();
    const MeshBVH entity(asset.mesh.triangles(frame.pose.inverse() * entity_pose));
    PointCloud rendered;
    for (const auto& r : scan(frame.sensor, entity)) rendered.push_back(r.point, config.intensity);
    const IndexSet removed = cull_background_by_entity(frame.cloud, origin, entity);
    const PointCloud visible = cull_entity_by_background(rendered, origin, view_occluders(scene, v));
    seen = seen || !visible.empty();

    AgentFrame& out = result.scene.frames[v];
    out.cloud = without(frame.cloud, removed);
    if (frame.road_mask) out.road_mask = remap_after_removal(*frame.road_mask, removed);
    ViewEdit& edit = result.edits[v];
    edit.removed = removed;
    edit.kept = out.cloud.size();
    edit.entity_begin = out.cloud.size();
    out.cloud.append(visible);
    edit.entity_end = out.cloud.size();
    edit.ground_begin = edit.ground_end = edit.refill_begin = edit.refill_end = edit.entity_end;
  }
  if (!seen) throw Error(Errc::invalid_location, "no agent sees the inserted entity");

  result.scene.objects.push_back({box, object_id, "car"});
  result.record.kind = OperatorKind::insertion;
  result.record.target = object_id;
  result.record.asset_id = asset.asset_id;
  result.record.params = {{"x", location.position.x()},
                          {"y", location.position.y()},
                          {"z", location.position.z()},
                          {"yaw", location.yaw}};
  result.record.seed = rng_seed;
  return result;
}

}  // namespace

OperatorResult insert(const Scene& scene, const EntityAsset& asset, const CandidateLocation& location,
                      std::uint64_t rng_seed, const OperatorConfig& config, std::string object_id) {
  return insert_on(scene, RoadIndex(scene, config), asset, location, rng_seed, config, std::move(object_id));
}

// Deletion -----------------------------------------------------------------

namespace {

// Margin around a deleted box: surface returns of the removed object sit on
// its boundary, and completion points must stay clear of it after float32
// storage.
constexpr double kDeleteMargin = 2e-3;

BBox3D inflated(const BBox3D& box, double margin) {
  return BBox3D(box.center(), box.dims() + Vec3::Constant(2 * margin), box.yaw());
}

// Road points of the frame (excluding removed ones) whose bearing from the
// sensor falls within the angular span of `box`, widened by `margin` radians.
PointCloud road_in_window(const AgentFrame& frame, const IndexSet& road, const IndexSet& removed,
                          const BBox3D& box, double margin) {
  const Vec2 o = frame.sensor.origin().head<2>();
  PointCloud out;
  if (point_in_footprint(o, box)) {
    for (std::size_t i : road) {
      if (!std::binary_search(removed.begin(), removed.end(), i)) out.points.push_back(frame.cloud[i]);
    }
    return out;
  }
  const Vec2 rel_center = box.center().head<2>() - o;
  const double mid = std::atan2(rel_center.y(), rel_center.x());
  double lo = 0, hi = 0;
  for (const auto& c : bev_corners(box)) {
    const Vec2 rel = c - o;
    const double d = normalize_yaw(std::atan2(rel.y(), rel.x()) - mid);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  lo -= margin;
  hi += margin;
  for (std::size_t i : road) {
    if (std::binary_search(removed.begin(), removed.end(), i)) continue;
    const Vec2 rel = frame.cloud[i].position.head<2>() - o;
    const double d = normalize_yaw(std::atan2(rel.y(), rel.x()) - mid);
    if (d >= lo && d <= hi) out.points.push_back(frame.cloud[i]);
  }
  return out;
}

}  // namespace

OperatorResult delete_object(const Scene& scene, std::string_view object_id, const OperatorConfig& config,
                             std::uint64_t rng_seed) {
  const auto target_index = scene.find_object(object_id);
  if (!target_index) throw Error(Errc::unknown_object, "no object with id '" + std::string(object_id) + "'");
  const GroundTruthObject& target = scene.objects[*target_index];

  OperatorResult result;
  result.scene = scene;
  result.scene.objects.erase(result.scene.objects.begin() + static_cast<std::ptrdiff_t>(*target_index));
  result.edits.resize(scene.frames.size());

  for (std::size_t v = 0; v < scene.frames.size(); ++v) {
    const AgentFrame& frame = scene.frames[v];
    const Vec3 origin = frame.sensor.origin();
    const BBox3D local_target = scene.box_in_view(target.box, v);
    const BBox3D keep_out = inflated(local_target, kDeleteMargin);
    const IndexSet removed = points_in_box(frame.cloud, keep_out);

    AgentFrame& out = result.scene.frames[v];
    out.cloud = without(frame.cloud, removed);
    if (frame.road_mask) out.road_mask = remap_after_removal(*frame.road_mask, removed);
    ViewEdit& edit = result.edits[v];
    edit.removed = removed;
    edit.kept = out.cloud.size();
    edit.entity_begin = edit.entity_end = edit.kept;

    std::vector<ScanReturn> ground_hits, refill_hits;
    if (!point_in_box(origin, local_target)) {
      OcclusionRegion shadow{origin, std::make_shared<MeshBVH>(box_triangles(local_target))};

      // Objects the target used to hide, at least partly.
      std::vector<BBox3D> refill_boxes, blocking_boxes;
      for (const auto& o : result.scene.objects) {
        const BBox3D local = scene.box_in_view(o.box, v);
        if (point_in_box(origin, local)) continue;
        if (occlusion_rate(origin, local, *shadow.occluder) > 0) {
          refill_boxes.push_back(local);
        } else {
          blocking_boxes.push_back(local);
        }
      }

      std::vector<Triangle> fill;
      try {
        const PointCloud road =
            road_in_window(frame, extract_road_indices(frame, config), removed, local_target, 3 * kDeg);
        fill = meshify_ground(road).triangles();
      } catch (const Error& e) {
        if (e.code() != Errc::no_road_found && e.code() != Errc::degenerate_input) throw;
      }
      const std::size_t ground_triangles = fill.size();
      for (const auto& b : refill_boxes) {
        const auto proxy = make_proxy_car(b.dims());
        const auto tris = proxy.mesh.triangles(Transform::FromYaw(b.yaw(), b.base()));
        fill.insert(fill.end(), tris.begin(), tris.end());
      }

      const MeshBVH blockers = MeshBVH::from_boxes(blocking_boxes);
      for (const auto& r : scan_shadow(frame.sensor, MeshBVH(std::move(fill)), shadow)) {
        if (point_in_box(r.point, keep_out) || blockers.blocks(origin, r.point)) continue;
        (r.triangle_index < ground_triangles ? ground_hits : refill_hits).push_back(r);
      }
    }

    edit.ground_begin = out.cloud.size();
    for (const auto& r : ground_hits) {
      if (out.road_mask) out.road_mask->push_back(out.cloud.size());
      out.cloud.push_back(r.point, config.intensity);
    }
    edit.ground_end = out.cloud.size();
    edit.refill_begin = out.cloud.size();
    for (const auto& r : refill_hits) out.cloud.push_back(r.point, config.intensity);
    edit.refill_end = out.cloud.size();
  }

  result.record.kind = OperatorKind::deletion;
  result.record.target = std::string(object_id);
  result.record.seed = rng_seed;
  return result;
}

// Composites ---------------------------------------------------------------

namespace {

void check_range(double value, double lo, double hi, const char* name) {
  if (!(value >= lo && value <= hi)) {
    throw Error(Errc::invalid_parameter, std::string(name) + " = " + std::to_string(value) + " outside [" +
                                             std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

template <typename MakeBox>
OperatorResult composite(const Scene& scene, std::string_view object_id, OperatorKind kind,
                         std::map<std::string, double> params, const OperatorConfig& config, std::uint64_t rng_seed,
                         MakeBox make_box) {
  const auto index = scene.find_object(object_id);
  if (!index) throw Error(Errc::unknown_object, "no object with id '" + std::string(object_id) + "'");
  const GroundTruthObject original = scene.objects[*index];

  OperatorResult removed = delete_object(scene, object_id, config, rng_seed);
  RoadIndex roads(removed.scene, config);
  roads.add_vacated(original.box);
  const std::optional<BBox3D> box = make_box(original.box, roads);
  if (!box) throw Error(Errc::invalid_target_pose, "no ground under the new pose of '" + original.object_id + "'");
  const auto check = check_placement(removed.scene, roads, *box, config);
  if (!check.valid()) {
    throw Error(Errc::invalid_target_pose,
                "new pose of '" + original.object_id + "' fails the insertion checks (" + failed_condition(check) + ")");
  }

  CandidateLocation location;
  location.position = box->base();
  location.yaw = box->yaw();
  OperatorResult result;
  try {
    result = insert_on(removed.scene, roads, make_proxy_car(box->dims()), location, rng_seed, config,
                       original.object_id);
  } catch (const Error& e) {
    if (e.code() != Errc::invalid_location) throw;
    throw Error(Errc::invalid_target_pose, e.what());
  }
  GroundTruthObject moved = std::move(result.scene.objects.back());
  result.scene.objects.pop_back();
  moved.label = original.label;
  result.scene.objects.insert(result.scene.objects.begin() + static_cast<std::ptrdiff_t>(*index), std::move(moved));

  result.record.kind = kind;
  result.record.params = std::move(params);
  return result;
}

}  // namespace

OperatorResult scale(const Scene& scene, std::string_view object_id, double sx, double sy, double sz,
                     const OperatorConfig& config, std::uint64_t rng_seed) {
  check_range(sx, config.scale_min, config.scale_max, "s_x");
  check_range(sy, config.scale_min, config.scale_max, "s_y");
  check_range(sz, config.scale_min, config.scale_max, "s_z");
  return composite(scene, object_id, OperatorKind::scale, {{"sx", sx}, {"sy", sy}, {"sz", sz}}, config, rng_seed,
                   [&](const BBox3D& b, const RoadIndex&) -> std::optional<BBox3D> {
                     const Vec3 dims = b.dims().cwiseProduct(Vec3(sx, sy, sz));
                     return BBox3D(b.base() + Vec3(0, 0, dims.z() / 2), dims, b.yaw());
                   });
}

OperatorResult rotate(const Scene& scene, std::string_view object_id, double rot, const OperatorConfig& config,
                      std::uint64_t rng_seed) {
  check_range(std::abs(rot) / kDeg, config.rotation_min_deg * (1 - 1e-12), config.rotation_max_deg * (1 + 1e-12),
              "|rot| in degrees");
  return composite(scene, object_id, OperatorKind::rotation, {{"rot", rot}}, config, rng_seed,
                   [&](const BBox3D& b, const RoadIndex&) -> std::optional<BBox3D> {
                     return BBox3D(b.center(), b.dims(), b.yaw() + rot);
                   });
}

OperatorResult translate(const Scene& scene, std::string_view object_id, double tx, double ty,
                         const OperatorConfig& config, std::uint64_t rng_seed) {
  check_range(tx, -config.max_translation, config.max_translation, "t_x");
  check_range(ty, -config.max_translation, config.max_translation, "t_y");
  double ground = 0;
  auto result = composite(scene, object_id, OperatorKind::translation, {{"tx", tx}, {"ty", ty}}, config, rng_seed,
                          [&](const BBox3D& b, const RoadIndex& roads) -> std::optional<BBox3D> {
                            const Vec2 xy = b.center().head<2>() + Vec2(tx, ty);
                            const auto z = roads.ground_height(xy);
                            if (!z) return std::nullopt;
                            ground = *z;
                            return BBox3D(Vec3(xy.x(), xy.y(), *z + b.height() / 2), b.dims(), b.yaw());
                          });
  result.record.params["z"] = ground;
  return result;
}

}  // namespace coopscene
