#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coopscene/detection.hpp"
#include "coopscene/fitness.hpp"
#include "coopscene/report.hpp"
#include "coopscene/scene_io.hpp"

namespace coopscene {

struct CaseInput {
  std::string name;
  TestCase test_case;
  /// Seed scene the case was generated from. Needed for the metamorphic
  /// check; cases without it are evaluated but not MR-checked.
  std::optional<Scene> seed;
};

struct EvaluationOptions {
  FitnessConfig fitness;
  double epsilon = 5.0;  // AP points
  int workers = 1;
};

/// Boxes added and removed (world frame) by an ops_log made only of
/// insertions and deletions. Empty when any other operator is present.
struct Lineage {
  std::vector<BBox3D> added;
  std::vector<BBox3D> removed;
};
std::optional<Lineage> insert_delete_lineage(const Scene& seed, const TestCase& test_case);

/// Runs the detector over every case and aggregates AP, OE/LE and MR
/// verdicts. A protocol_violation from the detector marks that case and the
/// run continues; process failures and timeouts propagate.
EvaluationReport evaluate_cases(std::span<const CaseInput> cases, const Detector& detector,
                                const EvaluationOptions& options);

}  // namespace coopscene
