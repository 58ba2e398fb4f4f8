#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coopscene/error.hpp"
#include "coopscene/scene.hpp"

namespace coopscene {

// Scene directory layout
//
//   scene.meta        JSON document (schema below)
//   <agent_id>.bin    point cloud: little-endian float32 x, y, z, intensity per
//                     point, no header
//   <agent_id>.road   optional road mask: little-endian uint32 point indices
//
// scene.meta:
//   {
//     "format": "coopscene.scene", "version": 1,
//     "scene_id": str, "timestamp": seconds,
//     "frames": [ { "agent_id": str, "role": "ego" | "cooperative",
//                   "pose": [[r00,r01,r02,tx],[r10,..,ty],[r20,..,tz]],   // local -> world
//                   "sensor": { "beam_elevations": [rad..], "azimuth_step": rad,
//                               "max_range": m, "sensor_origin_height": m },
//                   "num_points": n, "road_mask": bool } ],
//     "objects": [ { "box": [x, y, z, l, w, h, yaw], "object_id": str, "class": str } ]
//   }
//
// Boxes are in the world frame. Frames and objects keep their in-memory order,
// so saving a loaded scene reproduces the files byte for byte.

inline constexpr std::string_view kSceneMetaFile = "scene.meta";
inline constexpr std::string_view kCaseMetaFile = "case.meta";

struct SceneIssue {
  Errc code;
  std::string message;
};

struct SceneLoadResult {
  std::optional<Scene> scene;  // set only when issues is empty
  std::vector<SceneIssue> issues;
};

/// Loads and checks everything it can, collecting one issue per violation.
SceneLoadResult try_load_scene(const std::filesystem::path& dir);

/// Throws the first issue reported by try_load_scene.
Scene load_scene(const std::filesystem::path& dir);

/// Writes the layout above. Creates `dir` if needed. Throws io_failure.
void save_scene(const Scene& scene, const std::filesystem::path& dir);

PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);

nlohmann::json to_json(const SensorConfig& sensor);
SensorConfig sensor_from_json(const nlohmann::json& j);

// Generated test cases ------------------------------------------------------

enum class OperatorKind { insertion, deletion, scale, rotation, translation };

/// Short codes IS, DL, SC, RO, TR.
std::string_view to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(std::string_view code);

/// One applied operator, with its parameters recorded exactly as applied.
struct OperatorRecord {
  OperatorKind kind = OperatorKind::insertion;
  std::string target;  // object id affected (new id for insertions)
  std::string asset_id;  // insertions and composites
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  bool operator==(const OperatorRecord&) const = default;
};

nlohmann::json to_json(const OperatorRecord& record);
OperatorRecord operator_record_from_json(const nlohmann::json& j);

/// A transformed scene (its objects are the transformed ground truth) plus the
/// provenance needed to reproduce and evaluate it.
struct TestCase {
  Scene scene;
  std::vector<OperatorRecord> ops_log;
  double fitness = 0;
  double f_op = 0;
  double f_lp = 0;
  std::size_t seed_index = 0;
  std::string seed_scene_id;
  std::string seed_source;  // seed scene directory as given to the generator

  bool operator==(const TestCase&) const = default;
};

// Test case bundle: a scene directory plus case.meta
//   { "format": "coopscene.case", "version": 1, "fitness": f, "f_op": f,
//     "f_lp": f, "ops_log": [ {"operator": "IS", "target": id, "asset_id": id,
//     "params": {...}, "seed": u64} ], "provenance": { "seed_index": i,
//     "seed_scene_id": id, "seed_source": path } }
void save_test_case(const TestCase& test_case, const std::filesystem::path& dir);
TestCase load_test_case(const std::filesystem::path& dir);

/// Content hash (FNV-1a 64) of a file, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace coopscene
