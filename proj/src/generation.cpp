#include "coopscene/generation.hpp"

#include <algorithm>
#include <numbers>

#include "coopscene/error.hpp"
#include "coopscene/parallel.hpp"

namespace coopscene {

void GenerationConfig::validate() const {
  if (gen_num < 1) throw Error(Errc::invalid_parameter, "gen_num must be at least 1");
  if (max_manipulations < 1) throw Error(Errc::invalid_parameter, "max_manipulations must be at least 1");
  if (operators.empty()) throw Error(Errc::invalid_parameter, "operator set is empty");
  if (max_attempts < 1) throw Error(Errc::invalid_parameter, "max_attempts must be at least 1");
}

namespace {

const GroundTruthObject& pick_object(const Scene& scene, Rng& rng) {
  if (scene.objects.empty()) throw Error(Errc::unknown_object, "scene has no objects to manipulate");
  return scene.objects[rng.index(scene.objects.size())];
}

OperatorResult apply_random(const Scene& scene, OperatorKind kind, Rng& rng, const OperatorContext& ops) {
  const OperatorConfig& cfg = ops.config;
  const std::uint64_t op_seed = rng.next();
  switch (kind) {
    case OperatorKind::insertion: {
      const EntityAsset asset = ops.assets.empty() ? make_proxy_car(cfg.proxy_dims) : ops.assets[rng.index(ops.assets.size())];
      const double yaw = choose_insertion_yaw(scene, rng);
      const auto location = sample_valid_location(scene, asset, yaw, rng, cfg);
      if (!location) throw Error(Errc::invalid_location, "no valid insertion location");
      return insert(scene, asset, *location, op_seed, cfg);
    }
    case OperatorKind::deletion:
      return delete_object(scene, pick_object(scene, rng).object_id, cfg, op_seed);
    case OperatorKind::scale: {
      const std::string id = pick_object(scene, rng).object_id;
      const double sx = rng.uniform(cfg.scale_min, cfg.scale_max);
      const double sy = rng.uniform(cfg.scale_min, cfg.scale_max);
      const double sz = rng.uniform(cfg.scale_min, cfg.scale_max);
      return scale(scene, id, sx, sy, sz, cfg, op_seed);
    }
    case OperatorKind::rotation: {
      const std::string id = pick_object(scene, rng).object_id;
      constexpr double deg = std::numbers::pi / 180;
      double rot = rng.uniform(cfg.rotation_min_deg * deg, cfg.rotation_max_deg * deg);
      if (rng.uniform() < 0.5) rot = -rot;
      return rotate(scene, id, rot, cfg, op_seed);
    }
    case OperatorKind::translation: {
      const std::string id = pick_object(scene, rng).object_id;
      const double tx = rng.uniform(-cfg.max_translation, cfg.max_translation);
      const double ty = rng.uniform(-cfg.max_translation, cfg.max_translation);
      return translate(scene, id, tx, ty, cfg, op_seed);
    }
  }
  throw Error(Errc::invalid_parameter, "unknown operator");
}

}  // namespace

std::pair<Scene, std::vector<OperatorRecord>> transform_seed(const Scene& seed, std::size_t seed_index,
                                                             const OperatorContext& ops,
                                                             const GenerationConfig& config) {
  Scene scene = seed;
  std::vector<OperatorRecord> log;
  for (int step = 0; step < config.max_manipulations; ++step) {
    std::optional<Error> last;
    bool done = false;
    for (int attempt = 0; attempt < config.max_attempts && !done; ++attempt) {
      Rng rng = Rng::keyed(config.master_seed, {seed_index, static_cast<std::uint64_t>(step),
                                                static_cast<std::uint64_t>(attempt)});
      const OperatorKind kind = config.operators[rng.index(config.operators.size())];
      try {
        OperatorResult result = apply_random(scene, kind, rng, ops);
        scene = std::move(result.scene);
        log.push_back(std::move(result.record));
        done = true;
      } catch (const Error& e) {
        switch (e.code()) {
          case Errc::invalid_location:
          case Errc::invalid_target_pose:
          case Errc::unknown_object:
          case Errc::no_road_found:
          case Errc::invalid_parameter:
            last = Error(e.code(), std::string(to_string(kind)) + ": " + e.what());
            break;
          default:
            throw;
        }
      }
    }
    if (!done) {
      throw Error(last->code(), "step " + std::to_string(step) + " failed after " +
                                    std::to_string(config.max_attempts) + " attempts; last: " + last->what());
    }
  }
  return {std::move(scene), std::move(log)};
}

SeedOutcome transform_and_score(const Scene& seed, std::size_t seed_index, const Detector& detector,
                                const OperatorContext& ops, const FitnessConfig& fitness_config,
                                const GenerationConfig& config) {
  SeedOutcome outcome;
  std::pair<Scene, std::vector<OperatorRecord>> transformed;
  try {
    transformed = transform_seed(seed, seed_index, ops, config);
  } catch (const Error& e) {
    outcome.failure = e.what();
    return outcome;
  }
  TestCase tc;
  tc.scene = std::move(transformed.first);
  tc.scene.scene_id = seed.scene_id + ".gen" + std::to_string(seed_index);
  tc.ops_log = std::move(transformed.second);
  const auto score = evaluate_fitness(tc.scene, detector.detect(tc.scene), fitness_config);
  tc.fitness = score.fitness;
  tc.f_op = score.f_op;
  tc.f_lp = score.f_lp;
  tc.seed_index = seed_index;
  tc.seed_scene_id = seed.scene_id;
  outcome.test_case = std::move(tc);
  return outcome;
}

void TopKBuffer::sort() {
  std::stable_sort(cases_.begin(), cases_.end(), [](const TestCase& a, const TestCase& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.seed_index < b.seed_index;
  });
}

bool TopKBuffer::offer(TestCase test_case) {
  if (capacity_ == 0) return false;
  if (cases_.size() < capacity_) {
    cases_.push_back(std::move(test_case));
    sort();
    return true;
  }
  if (!(test_case.fitness > cases_.back().fitness)) return false;
  cases_.back() = std::move(test_case);
  sort();
  return true;
}

GenerationResult generate(std::span<const Scene> seeds, const Detector& detector, const OperatorContext& ops,
                          const FitnessConfig& fitness_config, const GenerationConfig& config) {
  config.validate();
  fitness_config.validate();
  const int workers = resolve_workers(config.workers);
  const std::size_t chunk = static_cast<std::size_t>(workers) * 4;

  GenerationResult result;
  TopKBuffer buffer(config.gen_num);
  for (std::size_t begin = 0; begin < seeds.size(); begin += chunk) {
    const std::size_t n = std::min(chunk, seeds.size() - begin);
    std::vector<SeedOutcome> outcomes(n);
    parallel_for(n, workers, [&](std::size_t i) {
      outcomes[i] = transform_and_score(seeds[begin + i], begin + i, detector, ops, fitness_config, config);
    });
    for (std::size_t i = 0; i < n; ++i) {
      if (outcomes[i].test_case) {
        ++result.transformed;
        buffer.offer(std::move(*outcomes[i].test_case));
      } else {
        result.log.push_back("seed " + std::to_string(begin + i) + " (" + seeds[begin + i].scene_id +
                             ") skipped: " + outcomes[i].failure);
      }
    }
  }
  result.cases = std::move(buffer).take();
  return result;
}

}  // namespace coopscene
