#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "coopscene/fitness.hpp"
#include "coopscene/generation.hpp"
#include "coopscene/operators.hpp"
#include "coopscene/scene.hpp"

namespace coopscene::cli {

/// Everything tunable from the config file. Sections mirror the library
/// structs field by field:
///
///   { "fitness":    { "alpha", "beta", "gamma", "k_longrange", "near_field", "dis_max": {agent: m} },
///     "generation": { "gen_num", "max_manipulations", "operators": ["IS", ...], "max_attempts" },
///     "operators":  { "grid_step", "road_neighborhood", ..., "proxy_dims": [l, w, h] },
///     "sensor":     { "beam_elevations", "azimuth_step", "max_range", "sensor_origin_height" },
///     "evaluation": { "epsilon" },
///     "detector":   { "timeout_ms" } }
///
/// Unknown sections or keys are rejected.
struct RunConfig {
  FitnessConfig fitness;
  GenerationConfig generation;
  OperatorConfig operators;
  SensorConfig sensor = SensorConfig::vlp32();
  double epsilon = 5.0;
  long long detector_timeout_ms = 120000;
};

nlohmann::json to_json(const RunConfig& config);

/// Overlays the keys present in `j`. Throws invalid_spec.
void apply_config(RunConfig& config, const nlohmann::json& j);

/// Defaults overlaid with a config file. Throws io_failure or invalid_spec.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace coopscene::cli
