#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coopscene/detection.hpp"
#include "coopscene/fitness.hpp"
#include "coopscene/mesh.hpp"
#include "coopscene/operators.hpp"
#include "coopscene/scene_io.hpp"

namespace coopscene {

struct GenerationConfig {
  std::size_t gen_num = 10;
  int max_manipulations = 3;
  std::vector<OperatorKind> operators = {OperatorKind::insertion, OperatorKind::deletion, OperatorKind::scale,
                                         OperatorKind::rotation, OperatorKind::translation};
  std::uint64_t master_seed = 0;
  int workers = 1;
  /// Operator draws tried per manipulation step before the seed is given up.
  int max_attempts = 10;

  void validate() const;
};

/// Operator configuration plus the insertion asset pool.
struct OperatorContext {
  OperatorConfig config;
  std::vector<EntityAsset> assets;  // empty -> the proxy car
};

struct SeedOutcome {
  std::optional<TestCase> test_case;
  std::string failure;  // set when the seed could not be transformed
};

/// Applies max_manipulations randomly drawn operators to one seed, using the
/// stream keyed by (master seed, seed index, step, attempt). Returns the
/// transformed scene and the log; throws the last operator error if a step
/// exhausts its attempts.
std::pair<Scene, std::vector<OperatorRecord>> transform_seed(const Scene& seed, std::size_t seed_index,
                                                             const OperatorContext& ops,
                                                             const GenerationConfig& config);

/// transform_seed, then detection and fitness scoring.
SeedOutcome transform_and_score(const Scene& seed, std::size_t seed_index, const Detector& detector,
                                const OperatorContext& ops, const FitnessConfig& fitness_config,
                                const GenerationConfig& config);

/// Fitness-sorted buffer holding at most `capacity` cases. A newcomer enters
/// while there is room, otherwise it replaces the current minimum only if its
/// fitness is strictly greater. Ties keep the earlier seed.
class TopKBuffer {
 public:
  explicit TopKBuffer(std::size_t capacity) : capacity_(capacity) {}
  /// True if the case was retained.
  bool offer(TestCase test_case);
  const std::vector<TestCase>& cases() const { return cases_; }
  std::vector<TestCase> take() && { return std::move(cases_); }

 private:
  void sort();
  std::size_t capacity_;
  std::vector<TestCase> cases_;
};

struct GenerationResult {
  std::vector<TestCase> cases;  // descending fitness
  std::vector<std::string> log;  // one line per skipped seed
  std::size_t transformed = 0;
};

/// Fitness-guided generation over the seeds in input order. Seeds are
/// transformed and scored in parallel chunks; the buffer is fed in seed order,
/// so the result does not depend on the worker count.
GenerationResult generate(std::span<const Scene> seeds, const Detector& detector, const OperatorContext& ops,
                          const FitnessConfig& fitness_config, const GenerationConfig& config);

}  // namespace coopscene
