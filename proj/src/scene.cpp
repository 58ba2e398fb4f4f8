#include "coopscene/scene.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "coopscene/error.hpp"

namespace coopscene {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

SensorConfig SensorConfig::vlp32() {
  static const double table_deg[32] = {-25.0,  -15.639, -11.31, -8.843, -7.254, -6.148, -5.333, -4.667,
                                       -4.0,   -3.667,  -3.333, -3.0,   -2.667, -2.333, -2.0,   -1.667,
                                       -1.333, -1.0,    -0.667, -0.333, 0.0,    0.333,  0.667,  1.0,
                                       1.333,  1.667,   2.333,  3.333,  4.667,  7.0,    10.333, 15.0};
  SensorConfig s;
  for (double d : table_deg) s.beam_elevations.push_back(d * kDeg);
  s.azimuth_step = 0.2 * kDeg;
  s.max_range = 100.0;
  s.sensor_origin_height = 1.7;
  return s;
}

std::size_t SensorConfig::azimuth_count() const {
  return static_cast<std::size_t>(std::floor(2 * std::numbers::pi / azimuth_step + 1e-9));
}

std::string SensorConfig::violation() const {
  if (beam_elevations.empty()) return "sensor has no beams";
  for (std::size_t i = 0; i < beam_elevations.size(); ++i) {
    if (!std::isfinite(beam_elevations[i]) || std::abs(beam_elevations[i]) >= std::numbers::pi / 2) {
      return "beam elevation out of range";
    }
    if (i > 0 && !(beam_elevations[i] > beam_elevations[i - 1])) return "beam elevations not strictly increasing";
  }
  if (!(azimuth_step > 0 && azimuth_step < std::numbers::pi / 2)) return "azimuth_step outside (0, pi/2)";
  if (!(max_range > 0) || !std::isfinite(max_range)) return "max_range must be positive";
  if (!std::isfinite(sensor_origin_height)) return "sensor_origin_height must be finite";
  return {};
}

std::string_view to_string(AgentRole role) { return role == AgentRole::ego ? "ego" : "cooperative"; }

bool AgentFrame::operator==(const AgentFrame& other) const {
  return agent_id == other.agent_id && role == other.role && pose.matrix() == other.pose.matrix() &&
         cloud == other.cloud && sensor == other.sensor && road_mask == other.road_mask;
}

std::size_t Scene::ego_index() const {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].role == AgentRole::ego) return i;
  }
  throw Error(Errc::invariant_violation, "scene '" + scene_id + "' has no ego frame");
}

std::optional<std::size_t> Scene::find_object(std::string_view object_id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].object_id == object_id) return i;
  }
  return std::nullopt;
}

BBox3D Scene::box_in_view(const BBox3D& world_box, std::size_t view) const {
  return transform_box(frames[view].pose.inverse(), world_box);
}

std::vector<std::string> scene_violations(const Scene& scene) {
  std::vector<std::string> out;
  std::size_t egos = 0;
  std::set<std::string> agent_ids;
  for (const auto& f : scene.frames) {
    if (f.role == AgentRole::ego) ++egos;
    if (f.agent_id.empty()) out.push_back("frame with empty agent_id");
    if (!agent_ids.insert(f.agent_id).second) out.push_back("duplicate agent_id '" + f.agent_id + "'");
    if (auto v = f.sensor.violation(); !v.empty()) out.push_back("frame '" + f.agent_id + "': " + v);
    for (std::size_t i = 0; i < f.cloud.size(); ++i) {
      const auto& p = f.cloud.points[i];
      if (!all_finite(p.position) || !std::isfinite(p.intensity)) {
        std::ostringstream msg;
        msg << "frame '" << f.agent_id << "': point " << i << " is not finite";
        out.push_back(msg.str());
        break;
      }
    }
    if (f.road_mask) {
      for (std::size_t k = 0; k < f.road_mask->size(); ++k) {
        const std::size_t idx = (*f.road_mask)[k];
        if (idx >= f.cloud.size() || (k > 0 && idx <= (*f.road_mask)[k - 1])) {
          std::ostringstream msg;
          msg << "frame '" << f.agent_id << "': road mask entry " << k << " (" << idx
              << ") is out of range or not strictly increasing";
          out.push_back(msg.str());
          break;
        }
      }
    }
  }
  if (egos != 1) {
    std::ostringstream msg;
    msg << "scene must have exactly one ego frame, found " << egos;
    out.push_back(msg.str());
  }
  if (scene.frames.size() < 2) out.push_back("scene needs at least one cooperative frame");
  std::set<std::string> ids;
  for (const auto& o : scene.objects) {
    if (o.object_id.empty()) out.push_back("object with empty object_id");
    if (!ids.insert(o.object_id).second) out.push_back("duplicate object_id '" + o.object_id + "'");
  }
  if (!std::isfinite(scene.timestamp)) out.push_back("timestamp is not finite");
  return out;
}

void validate_scene(const Scene& scene) {
  const auto issues = scene_violations(scene);
  if (!issues.empty()) throw Error(Errc::invariant_violation, issues.front());
}

}  // namespace coopscene
