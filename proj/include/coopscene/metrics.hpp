#pragma once

#include <optional>
#include <span>
#include <vector>

#include "coopscene/detection.hpp"
#include "coopscene/fitness.hpp"
#include "coopscene/scene.hpp"

namespace coopscene {

struct MatchResult {
  std::vector<std::optional<std::size_t>> detection_to_gt;  // per detection
  std::vector<double> detection_iou;  // IoU with the matched GT, 0 when unmatched
  std::vector<bool> gt_matched;
};

/// Greedy matching: detections in descending confidence (stable) each claim
/// the unmatched GT with the highest IoU, provided IoU > gamma.
MatchResult match(const DetectionSet& detections, std::span<const BBox3D> ground_truth, double gamma);

/// Detections and ground truth of one scene, both in the same frame.
struct EvaluationSample {
  DetectionSet detections;
  std::vector<BBox3D> ground_truth;
};

/// 11-point interpolated average precision over the pooled, confidence
/// sorted detections of all samples, as a percentage. With no ground truth at
/// all the result is 100 when there are no detections and 0 otherwise.
double ap_r11(std::span<const EvaluationSample> samples, double gamma);

struct ErrorCounts {
  std::size_t oe = 0;  // missed and Occ_ego > 0
  std::size_t le = 0;  // missed and Dis_ego > k
  std::size_t occluded = 0;  // GT with Occ_ego > 0
  std::size_t far = 0;  // GT with Dis_ego > k
  std::size_t ground_truth = 0;
  std::size_t missed = 0;
  double oer = 0;  // oe / occluded (0 when no occluded GT)
  double ler = 0;  // le / far

  ErrorCounts& operator+=(const ErrorCounts& other);
  void finalize_rates();
};

ErrorCounts count_errors(const Scene& scene, const DetectionSet& detections, const FitnessConfig& config);

/// Pooled counts; scenes and detections are parallel arrays.
ErrorCounts count_errors(std::span<const Scene> scenes, std::span<const DetectionSet> detections,
                         const FitnessConfig& config);

struct MrVerdict {
  bool violated = false;
  double ap_reference = 0;  // AP of cp_before against its own kept boxes
  double ap_transformed = 0;  // AP of cp_after against the expected set
  bool removed_still_detected = false;
};

/// Boxes of a detection set after dropping duplicates: in descending
/// confidence, a box is kept unless it overlaps an already kept box with
/// IoU > gamma.
std::vector<BBox3D> kept_boxes(const DetectionSet& detections, double gamma);

/// General soft-equality check for a transformation that inserted `added` and
/// removed `removed` (ego frame). Expected = kept_boxes(cp_before) minus any
/// box matching a removed one, plus the added boxes. Violated when
/// AP(cp_after vs expected) < AP(cp_before vs kept) - epsilon, or when any
/// cp_after box still overlaps a removed box with IoU > gamma.
MrVerdict mr_check(const DetectionSet& cp_before, std::span<const BBox3D> added, std::span<const BBox3D> removed,
                   const DetectionSet& cp_after, double epsilon = 5.0, double gamma = 0.5);

MrVerdict mr_check_insert(const DetectionSet& cp_before, const BBox3D& gt_ins, const DetectionSet& cp_after,
                          double epsilon = 5.0, double gamma = 0.5);
MrVerdict mr_check_delete(const DetectionSet& cp_before, const BBox3D& gt_del, const DetectionSet& cp_after,
                          double epsilon = 5.0, double gamma = 0.5);

}  // namespace coopscene
