#include "config.hpp"

#include <fstream>
#include <set>

#include "coopscene/error.hpp"
#include "coopscene/scene_io.hpp"

namespace coopscene::cli {

using nlohmann::json;

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(Errc::invalid_spec, "config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& value) {
    allowed_.insert(key);
    if (!j_.contains(key)) return;
    try {
      value = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(Errc::invalid_spec, "config " + name_ + "." + key + ": " + e.what());
    }
  }

  void read(const char* key, Vec3& value) {
    std::vector<double> v;
    read(key, v);
    if (j_.contains(key)) {
      if (v.size() != 3) throw Error(Errc::invalid_spec, "config " + name_ + "." + key + " must have 3 numbers");
      value = Vec3(v[0], v[1], v[2]);
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!allowed_.count(key)) throw Error(Errc::invalid_spec, "unknown config key " + name_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> allowed_;
};

}  // namespace

json to_json(const RunConfig& c) {
  json ops = json::array();
  for (auto k : c.generation.operators) ops.push_back(std::string(to_string(k)));
  const OperatorConfig& o = c.operators;
  return {
      {"fitness",
       {{"alpha", c.fitness.alpha},
        {"beta", c.fitness.beta},
        {"gamma", c.fitness.gamma},
        {"k_longrange", c.fitness.k_longrange},
        {"near_field", c.fitness.near_field},
        {"dis_max", c.fitness.dis_max}}},
      {"generation",
       {{"gen_num", c.generation.gen_num},
        {"max_manipulations", c.generation.max_manipulations},
        {"operators", ops},
        {"max_attempts", c.generation.max_attempts}}},
      {"operators",
       {{"ransac_iterations", o.ransac_iterations},
        {"ransac_inlier_threshold", o.ransac_inlier_threshold},
        {"ransac_seed", o.ransac_seed},
        {"ransac_max_tilt_deg", o.ransac_max_tilt_deg},
        {"ransac_max_ground_offset", o.ransac_max_ground_offset},
        {"grid_step", o.grid_step},
        {"road_neighborhood", o.road_neighborhood},
        {"footprint_sample_step", o.footprint_sample_step},
        {"max_occlusion", o.max_occlusion},
        {"agent_footprint", vec3_json(o.agent_footprint)},
        {"scale_min", o.scale_min},
        {"scale_max", o.scale_max},
        {"rotation_min_deg", o.rotation_min_deg},
        {"rotation_max_deg", o.rotation_max_deg},
        {"max_translation", o.max_translation},
        {"intensity", o.intensity},
        {"proxy_dims", vec3_json(o.proxy_dims)}}},
      {"sensor", coopscene::to_json(c.sensor)},
      {"evaluation", {{"epsilon", c.epsilon}}},
      {"detector", {{"timeout_ms", c.detector_timeout_ms}}},
  };
}

void apply_config(RunConfig& c, const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_spec, "config must be an object");
  for (const auto& [name, section] : j.items()) {
    if (name == "fitness") {
      Section s(section, name);
      s.read("alpha", c.fitness.alpha);
      s.read("beta", c.fitness.beta);
      s.read("gamma", c.fitness.gamma);
      s.read("k_longrange", c.fitness.k_longrange);
      s.read("near_field", c.fitness.near_field);
      s.read("dis_max", c.fitness.dis_max);
      s.finish();
    } else if (name == "generation") {
      Section s(section, name);
      s.read("gen_num", c.generation.gen_num);
      s.read("max_manipulations", c.generation.max_manipulations);
      s.read("max_attempts", c.generation.max_attempts);
      std::vector<std::string> codes;
      s.read("operators", codes);
      if (section.contains("operators")) {
        c.generation.operators.clear();
        for (const auto& code : codes) c.generation.operators.push_back(operator_kind_from_string(code));
      }
      s.finish();
    } else if (name == "operators") {
      Section s(section, name);
      OperatorConfig& o = c.operators;
      s.read("ransac_iterations", o.ransac_iterations);
      s.read("ransac_inlier_threshold", o.ransac_inlier_threshold);
      s.read("ransac_seed", o.ransac_seed);
      s.read("ransac_max_tilt_deg", o.ransac_max_tilt_deg);
      s.read("ransac_max_ground_offset", o.ransac_max_ground_offset);
      s.read("grid_step", o.grid_step);
      s.read("road_neighborhood", o.road_neighborhood);
      s.read("footprint_sample_step", o.footprint_sample_step);
      s.read("max_occlusion", o.max_occlusion);
      s.read("agent_footprint", o.agent_footprint);
      s.read("scale_min", o.scale_min);
      s.read("scale_max", o.scale_max);
      s.read("rotation_min_deg", o.rotation_min_deg);
      s.read("rotation_max_deg", o.rotation_max_deg);
      s.read("max_translation", o.max_translation);
      s.read("intensity", o.intensity);
      s.read("proxy_dims", o.proxy_dims);
      s.finish();
    } else if (name == "sensor") {
      json merged = coopscene::to_json(c.sensor);
      merged.update(section);
      try {
        c.sensor = sensor_from_json(merged);
      } catch (const json::exception& e) {
        throw Error(Errc::invalid_spec, std::string("config sensor: ") + e.what());
      }
      if (merged.size() != 4) throw Error(Errc::invalid_spec, "config sensor has unknown keys");
      if (const auto v = c.sensor.violation(); !v.empty()) throw Error(Errc::invalid_spec, "config sensor: " + v);
    } else if (name == "evaluation") {
      Section s(section, name);
      s.read("epsilon", c.epsilon);
      s.finish();
    } else if (name == "detector") {
      Section s(section, name);
      s.read("timeout_ms", c.detector_timeout_ms);
      s.finish();
    } else {
      throw Error(Errc::invalid_spec, "unknown config section '" + name + "'");
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_spec, path.string() + ": " + e.what());
  }
  RunConfig c;
  apply_config(c, j);
  return c;
}

}  // namespace coopscene::cli
