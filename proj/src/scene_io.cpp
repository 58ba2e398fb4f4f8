#include "coopscene/scene_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "coopscene/rng.hpp"

namespace coopscene {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kSceneFormat = "coopscene.scene";
constexpr std::string_view kCaseFormat = "coopscene.case";
constexpr int kFormatVersion = 1;

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return value;
  }
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
}

json pose_to_json(const Transform& t) {
  const auto m = t.matrix();
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

Transform pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::malformed_file, "pose must be a 3x4 matrix");
  Eigen::Matrix<double, 3, 4> m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw Error(Errc::malformed_file, "pose must be a 3x4 matrix");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return Transform::FromMatrix(m);
}

json box_to_json(const BBox3D& b) {
  return {b.center().x(), b.center().y(), b.center().z(), b.length(), b.width(), b.height(), b.yaw()};
}

BBox3D box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 7) throw Error(Errc::malformed_file, "box must have 7 numbers");
  std::array<double, 7> v;
  for (int i = 0; i < 7; ++i) v[i] = j[i].get<double>();
  return BBox3D(Vec3(v[0], v[1], v[2]), v[3], v[4], v[5], v[6]);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

json to_json(const SensorConfig& s) {
  return {{"beam_elevations", s.beam_elevations},
          {"azimuth_step", s.azimuth_step},
          {"max_range", s.max_range},
          {"sensor_origin_height", s.sensor_origin_height}};
}

SensorConfig sensor_from_json(const json& j) {
  SensorConfig s;
  s.beam_elevations = j.at("beam_elevations").get<std::vector<double>>();
  s.azimuth_step = j.at("azimuth_step").get<double>();
  s.max_range = j.at("max_range").get<double>();
  s.sensor_origin_height = j.at("sensor_origin_height").get<double>();
  return s;
}

PointCloud read_point_cloud(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 16 != 0) {
    std::ostringstream msg;
    msg << path.string() << ": truncated point record at byte offset " << bytes.size() - bytes.size() % 16
        << " (file is " << bytes.size() << " bytes, not a multiple of 16)";
    throw Error(Errc::malformed_file, msg.str());
  }
  PointCloud cloud;
  cloud.points.resize(bytes.size() / 16);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + 16 * i, 16);
    for (float& f : v) f = to_little_endian(f);
    cloud.points[i] = {Vec3(v[0], v[1], v[2]), v[3]};
  }
  return cloud;
}

void write_point_cloud(const PointCloud& cloud, const fs::path& path) {
  std::vector<char> bytes(cloud.size() * 16);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const float v[4] = {to_little_endian(static_cast<float>(p.position.x())),
                        to_little_endian(static_cast<float>(p.position.y())),
                        to_little_endian(static_cast<float>(p.position.z())),
                        to_little_endian(static_cast<float>(p.intensity))};
    std::memcpy(bytes.data() + 16 * i, v, 16);
  }
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
}

namespace {

IndexSet read_road_mask(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() % 4 != 0) {
    std::ostringstream msg;
    msg << path.string() << ": truncated road index at byte offset " << bytes.size() - bytes.size() % 4;
    throw Error(Errc::malformed_file, msg.str());
  }
  IndexSet mask(bytes.size() / 4);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + 4 * i, 4);
    mask[i] = to_little_endian(v);
  }
  return mask;
}

void write_road_mask(const IndexSet& mask, const fs::path& path) {
  std::vector<char> bytes(mask.size() * 4);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const std::uint32_t v = to_little_endian(static_cast<std::uint32_t>(mask[i]));
    std::memcpy(bytes.data() + 4 * i, &v, 4);
  }
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
}

}  // namespace

SceneLoadResult try_load_scene(const fs::path& dir) {
  SceneLoadResult result;
  auto issue = [&](Errc code, std::string message) { result.issues.push_back({code, std::move(message)}); };

  const fs::path meta_path = dir / kSceneMetaFile;
  if (!fs::exists(meta_path)) {
    issue(Errc::missing_frame, meta_path.string() + " does not exist");
    return result;
  }
  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    issue(Errc::malformed_file, meta_path.string() + ": " + e.what());
    return result;
  }

  Scene scene;
  try {
    if (meta.value("format", "") != kSceneFormat) {
      issue(Errc::malformed_file, meta_path.string() + ": missing or wrong \"format\" tag");
      return result;
    }
    if (meta.value("version", 0) != kFormatVersion) {
      issue(Errc::malformed_file, meta_path.string() + ": unsupported version");
      return result;
    }
    scene.scene_id = meta.at("scene_id").get<std::string>();
    scene.timestamp = meta.at("timestamp").get<double>();
    for (const auto& jf : meta.at("frames")) {
      AgentFrame frame;
      frame.agent_id = jf.at("agent_id").get<std::string>();
      const auto role = jf.at("role").get<std::string>();
      if (role == "ego") {
        frame.role = AgentRole::ego;
      } else if (role == "cooperative") {
        frame.role = AgentRole::cooperative;
      } else {
        issue(Errc::malformed_file, "frame '" + frame.agent_id + "': unknown role '" + role + "'");
      }
      try {
        frame.pose = pose_from_json(jf.at("pose"));
      } catch (const Error& e) {
        issue(e.code(), "frame '" + frame.agent_id + "' pose: " + e.what());
      }
      frame.sensor = sensor_from_json(jf.at("sensor"));
      const auto num_points = jf.at("num_points").get<std::size_t>();

      const fs::path bin = dir / (frame.agent_id + ".bin");
      if (!fs::exists(bin)) {
        issue(Errc::missing_frame, "frame '" + frame.agent_id + "': " + bin.string() + " does not exist");
      } else {
        try {
          const auto size = fs::file_size(bin);
          if (size != num_points * 16 && size % 16 == 0) {
            std::ostringstream msg;
            msg << bin.string() << ": expected " << num_points << " points (" << num_points * 16
                << " bytes), data ends at byte offset " << size;
            issue(Errc::malformed_file, msg.str());
          } else {
            frame.cloud = read_point_cloud(bin);
          }
        } catch (const Error& e) {
          issue(e.code(), e.what());
        }
      }
      if (jf.value("road_mask", false)) {
        const fs::path road = dir / (frame.agent_id + ".road");
        if (!fs::exists(road)) {
          issue(Errc::missing_frame, "frame '" + frame.agent_id + "': " + road.string() + " does not exist");
        } else {
          try {
            frame.road_mask = read_road_mask(road);
          } catch (const Error& e) {
            issue(e.code(), e.what());
          }
        }
      }
      scene.frames.push_back(std::move(frame));
    }
    std::size_t index = 0;
    for (const auto& jo : meta.at("objects")) {
      const auto id = jo.at("object_id").get<std::string>();
      try {
        scene.objects.push_back({box_from_json(jo.at("box")), id, jo.at("class").get<std::string>()});
      } catch (const Error& e) {
        issue(e.code(), "object " + std::to_string(index) + " ('" + id + "'): " + e.what());
      }
      ++index;
    }
  } catch (const json::exception& e) {
    issue(Errc::malformed_file, meta_path.string() + ": " + e.what());
    return result;
  }

  if (result.issues.empty()) {
    for (auto& v : scene_violations(scene)) issue(Errc::invariant_violation, std::move(v));
  }
  if (result.issues.empty()) result.scene = std::move(scene);
  return result;
}

Scene load_scene(const fs::path& dir) {
  auto result = try_load_scene(dir);
  if (!result.issues.empty()) {
    throw Error(result.issues.front().code, result.issues.front().message);
  }
  return std::move(*result.scene);
}

void save_scene(const Scene& scene, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());

  json frames = json::array();
  for (const auto& f : scene.frames) {
    frames.push_back({{"agent_id", f.agent_id},
                      {"role", std::string(to_string(f.role))},
                      {"pose", pose_to_json(f.pose)},
                      {"sensor", to_json(f.sensor)},
                      {"num_points", f.cloud.size()},
                      {"road_mask", f.road_mask.has_value()}});
    write_point_cloud(f.cloud, dir / (f.agent_id + ".bin"));
    if (f.road_mask) write_road_mask(*f.road_mask, dir / (f.agent_id + ".road"));
  }
  json objects = json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"box", box_to_json(o.box)}, {"object_id", o.object_id}, {"class", o.label}});
  }
  const json meta = {{"format", kSceneFormat}, {"version", kFormatVersion}, {"scene_id", scene.scene_id},
                     {"timestamp", scene.timestamp}, {"frames", frames}, {"objects", objects}};
  write_text(dir / kSceneMetaFile, dump(meta));
}

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::insertion: return "IS";
    case OperatorKind::deletion: return "DL";
    case OperatorKind::scale: return "SC";
    case OperatorKind::rotation: return "RO";
    case OperatorKind::translation: return "TR";
  }
  return "??";
}

OperatorKind operator_kind_from_string(std::string_view code) {
  for (auto k : {OperatorKind::insertion, OperatorKind::deletion, OperatorKind::scale, OperatorKind::rotation,
                 OperatorKind::translation}) {
    if (to_string(k) == code) return k;
  }
  throw Error(Errc::invalid_spec, "unknown operator code '" + std::string(code) + "'");
}

json to_json(const OperatorRecord& r) {
  json params = json::object();
  for (const auto& [k, v] : r.params) params[k] = v;
  return {{"operator", std::string(to_string(r.kind))},
          {"target", r.target},
          {"asset_id", r.asset_id},
          {"params", params},
          {"seed", r.seed}};
}

OperatorRecord operator_record_from_json(const json& j) {
  OperatorRecord r;
  r.kind = operator_kind_from_string(j.at("operator").get<std::string>());
  r.target = j.at("target").get<std::string>();
  r.asset_id = j.value("asset_id", "");
  for (const auto& [k, v] : j.at("params").items()) r.params[k] = v.get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

void save_test_case(const TestCase& tc, const fs::path& dir) {
  save_scene(tc.scene, dir);
  json ops = json::array();
  for (const auto& r : tc.ops_log) ops.push_back(to_json(r));
  const json meta = {{"format", kCaseFormat},
                     {"version", kFormatVersion},
                     {"fitness", tc.fitness},
                     {"f_op", tc.f_op},
                     {"f_lp", tc.f_lp},
                     {"ops_log", ops},
                     {"provenance",
                      {{"seed_index", tc.seed_index},
                       {"seed_scene_id", tc.seed_scene_id},
                       {"seed_source", tc.seed_source}}}};
  write_text(dir / kCaseMetaFile, dump(meta));
}

TestCase load_test_case(const fs::path& dir) {
  TestCase tc;
  tc.scene = load_scene(dir);
  const fs::path meta_path = dir / kCaseMetaFile;
  if (!fs::exists(meta_path)) throw Error(Errc::missing_frame, meta_path.string() + " does not exist");
  try {
    std::ifstream in(meta_path);
    const json meta = json::parse(in);
    if (meta.value("format", "") != kCaseFormat) {
      throw Error(Errc::malformed_file, meta_path.string() + ": missing or wrong \"format\" tag");
    }
    tc.fitness = meta.at("fitness").get<double>();
    tc.f_op = meta.value("f_op", 0.0);
    tc.f_lp = meta.value("f_lp", 0.0);
    for (const auto& r : meta.at("ops_log")) tc.ops_log.push_back(operator_record_from_json(r));
    const auto& prov = meta.at("provenance");
    tc.seed_index = prov.at("seed_index").get<std::size_t>();
    tc.seed_scene_id = prov.at("seed_scene_id").get<std::string>();
    tc.seed_source = prov.value("seed_source", "");
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_file, meta_path.string() + ": " + e.what());
  }
  if (tc.ops_log.empty()) throw Error(Errc::invariant_violation, meta_path.string() + ": empty ops_log");
  if (!std::isfinite(tc.fitness) || tc.fitness < 0) {
    throw Error(Errc::invariant_violation, meta_path.string() + ": fitness must be finite and non-negative");
  }
  return tc;
}

std::string file_digest(const fs::path& path) {
  const auto bytes = read_bytes(path);
  const std::uint64_t h = stable_hash(std::string_view(bytes.data(), bytes.size()));
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace coopscene
