#include "coopscene/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace coopscene {

namespace {

std::vector<std::size_t> by_confidence(const DetectionSet& detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections.detections[a].confidence > detections.detections[b].confidence;
  });
  return order;
}

}  // namespace

MatchResult match(const DetectionSet& detections, std::span<const BBox3D> ground_truth, double gamma) {
  MatchResult out;
  out.detection_to_gt.assign(detections.size(), std::nullopt);
  out.detection_iou.assign(detections.size(), 0.0);
  out.gt_matched.assign(ground_truth.size(), false);
  for (std::size_t d : by_confidence(detections)) {
    std::optional<std::size_t> best;
    double best_iou = gamma;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (out.gt_matched[g]) continue;
      const double iou = iou_bev(detections.detections[d].box, ground_truth[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best) {
      out.detection_to_gt[d] = best;
      out.detection_iou[d] = best_iou;
      out.gt_matched[*best] = true;
    }
  }
  return out;
}

double ap_r11(std::span<const EvaluationSample> samples, double gamma) {
  struct Scored {
    double confidence;
    bool true_positive;
  };
  std::vector<Scored> pooled;
  std::size_t total_gt = 0;
  for (const auto& s : samples) {
    total_gt += s.ground_truth.size();
    const auto m = match(s.detections, s.ground_truth, gamma);
    for (std::size_t d = 0; d < s.detections.size(); ++d) {
      pooled.push_back({s.detections.detections[d].confidence, m.detection_to_gt[d].has_value()});
    }
  }
  if (total_gt == 0) return pooled.empty() ? 100.0 : 0.0;
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Scored& a, const Scored& b) { return a.confidence > b.confidence; });

  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    tp += pooled[i].true_positive ? 1 : 0;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  double sum = 0;
  for (int k = 0; k <= 10; ++k) {
    const double level = k / 10.0;
    double best = 0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
      if (recall[i] >= level) best = std::max(best, precision[i]);
    }
    sum += best;
  }
  return sum / 11.0 * 100.0;
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& other) {
  oe += other.oe;
  le += other.le;
  occluded += other.occluded;
  far += other.far;
  ground_truth += other.ground_truth;
  missed += other.missed;
  finalize_rates();
  return *this;
}

void ErrorCounts::finalize_rates() {
  oer = occluded ? static_cast<double>(oe) / static_cast<double>(occluded) : 0.0;
  ler = far ? static_cast<double>(le) / static_cast<double>(far) : 0.0;
}

ErrorCounts count_errors(const Scene& scene, const DetectionSet& detections, const FitnessConfig& config) {
  ErrorCounts out;
  for (const auto& t : object_terms(scene, config)) {
    const bool missed = is_missed(t.ego_box, detections, config.gamma);
    const bool occluded = t.occ_ego > 0;
    const bool far = t.dis_ego > config.k_longrange;
    ++out.ground_truth;
    out.missed += missed;
    out.occluded += occluded;
    out.far += far;
    out.oe += missed && occluded;
    out.le += missed && far;
  }
  out.finalize_rates();
  return out;
}

ErrorCounts count_errors(std::span<const Scene> scenes, std::span<const DetectionSet> detections,
                         const FitnessConfig& config) {
  ErrorCounts out;
  for (std::size_t i = 0; i < scenes.size(); ++i) out += count_errors(scenes[i], detections[i], config);
  out.finalize_rates();
  return out;
}

std::vector<BBox3D> kept_boxes(const DetectionSet& detections, double gamma) {
  std::vector<BBox3D> kept;
  for (std::size_t d : by_confidence(detections)) {
    const BBox3D& box = detections.detections[d].box;
    if (std::none_of(kept.begin(), kept.end(), [&](const BBox3D& k) { return iou_bev(k, box) > gamma; })) {
      kept.push_back(box);
    }
  }
  return kept;
}

MrVerdict mr_check(const DetectionSet& cp_before, std::span<const BBox3D> added, std::span<const BBox3D> removed,
                   const DetectionSet& cp_after, double epsilon, double gamma) {
  auto overlaps_removed = [&](const BBox3D& b) {
    return std::any_of(removed.begin(), removed.end(), [&](const BBox3D& r) { return iou_bev(b, r) > gamma; });
  };
  MrVerdict out;
  const std::vector<BBox3D> reference = kept_boxes(cp_before, gamma);
  {
    const EvaluationSample s{cp_before, reference};
    out.ap_reference = ap_r11(std::span(&s, 1), gamma);
  }
  std::vector<BBox3D> expected;
  for (const auto& b : reference) {
    if (!overlaps_removed(b)) expected.push_back(b);
  }
  expected.insert(expected.end(), added.begin(), added.end());
  {
    const EvaluationSample s{cp_after, expected};
    out.ap_transformed = ap_r11(std::span(&s, 1), gamma);
  }
  out.removed_still_detected = std::any_of(cp_after.detections.begin(), cp_after.detections.end(),
                                           [&](const Detection& d) { return overlaps_removed(d.box); });
  out.violated = out.ap_transformed < out.ap_reference - epsilon || out.removed_still_detected;
  return out;
}

MrVerdict mr_check_insert(const DetectionSet& cp_before, const BBox3D& gt_ins, const DetectionSet& cp_after,
                          double epsilon, double gamma) {
  return mr_check(cp_before, std::span(&gt_ins, 1), {}, cp_after, epsilon, gamma);
}

MrVerdict mr_check_delete(const DetectionSet& cp_before, const BBox3D& gt_del, const DetectionSet& cp_after,
                          double epsilon, double gamma) {
  return mr_check(cp_before, {}, std::span(&gt_del, 1), cp_after, epsilon, gamma);
}

}  // namespace coopscene
