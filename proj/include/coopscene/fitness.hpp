#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "coopscene/detection.hpp"
#include "coopscene/scene.hpp"

namespace coopscene {

struct FitnessConfig {
  double alpha = 0.5;
  double beta = 0.5;
  double gamma = 0.5;  // IoU threshold
  double k_longrange = 50;  // meters
  /// Per-agent maximum recognition distance; agents not listed use their
  /// sensor's max_range.
  std::map<std::string, double> dis_max;
  /// Objects closer than this to the ego sensor are left out of the sums.
  double near_field = 1.0;

  /// Throws invalid_parameter unless alpha, beta >= 0, alpha + beta = 1
  /// (to 1e-12) and gamma in (0, 1).
  void validate() const;
};

/// Geometry of one GT object relative to every agent.
struct ObjectTerms {
  std::string object_id;
  BBox3D ego_box;  // GT box in the ego frame
  double occ_ego = 0;
  double dis_ego = 0;
  double dis_max_ego = 1;
  std::vector<double> occ_cv;  // one entry per cooperative frame, scene order
  std::vector<double> dis_cv;
  std::vector<double> dis_max_cv;
};

/// Occlusion rates (GT boxes as occluders) and sensor-to-center distances for
/// every GT object, in scene order.
std::vector<ObjectTerms> object_terms(const Scene& scene, const FitnessConfig& config);

/// True iff no detection overlaps the box with BEV IoU strictly above gamma.
bool is_missed(const BBox3D& gt_box, const DetectionSet& detections, double gamma);

/// Occlusion score: sum over missed objects of Occ_ego * prod_i (1 - Occ_cv_i).
double f_op(std::span<const ObjectTerms> terms, std::span<const bool> missed);

/// Long-range score: sum over missed objects of
/// min(Dis_ego, max)/max * prod_i (1 - min(Dis_cv_i, max_i)/max_i).
double f_lp(std::span<const ObjectTerms> terms, std::span<const bool> missed);

struct FitnessBreakdown {
  double f_op = 0;
  double f_lp = 0;
  double fitness = 0;
};

double fitness(double f_op_score, double f_lp_score, const FitnessConfig& config);

/// Scene-level scores. Objects within near_field of the ego sensor are
/// skipped.
double f_op(const Scene& scene, const DetectionSet& detections, const FitnessConfig& config);
double f_lp(const Scene& scene, const DetectionSet& detections, const FitnessConfig& config);
FitnessBreakdown evaluate_fitness(const Scene& scene, const DetectionSet& detections, const FitnessConfig& config);

}  // namespace coopscene
