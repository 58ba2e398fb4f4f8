#include "coopscene/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "coopscene/error.hpp"
#include "coopscene/lidar.hpp"

namespace coopscene {

void FitnessConfig::validate() const {
  if (!(alpha >= 0) || !(beta >= 0) || !(std::abs(alpha + beta - 1) <= 1e-12)) {
    throw Error(Errc::invalid_parameter, "fitness weights must be non-negative and sum to 1");
  }
  if (!(gamma > 0 && gamma < 1)) throw Error(Errc::invalid_parameter, "IoU threshold must lie in (0, 1)");
  if (!(k_longrange > 0)) throw Error(Errc::invalid_parameter, "long-range threshold must be positive");
  if (!(near_field >= 0)) throw Error(Errc::invalid_parameter, "near-field radius must be non-negative");
  for (const auto& [agent, d] : dis_max) {
    if (!(d > 0) || !std::isfinite(d)) {
      throw Error(Errc::invalid_parameter, "maximum recognition distance of '" + agent + "' must be positive");
    }
  }
}

namespace {

double max_distance(const AgentFrame& frame, const FitnessConfig& config) {
  const auto it = config.dis_max.find(frame.agent_id);
  return it != config.dis_max.end() ? it->second : frame.sensor.max_range;
}

}  // namespace

std::vector<ObjectTerms> object_terms(const Scene& scene, const FitnessConfig& config) {
  const std::size_t ego = scene.ego_index();
  std::vector<ObjectTerms> out;
  out.reserve(scene.objects.size());
  for (const auto& o : scene.objects) {
    const std::string exclude[] = {o.object_id};
    ObjectTerms t{o.object_id, scene.box_in_view(o.box, ego), 0, 0, 1, {}, {}, {}};
    for (std::size_t v = 0; v < scene.frames.size(); ++v) {
      const AgentFrame& f = scene.frames[v];
      const Vec3 origin = f.sensor_origin_world();
      const double occ = occlusion_rate(origin, o.box, world_occluders(scene, origin, exclude));
      const double dis = (o.box.center() - origin).norm();
      if (v == ego) {
        t.occ_ego = occ;
        t.dis_ego = dis;
        t.dis_max_ego = max_distance(f, config);
      } else {
        t.occ_cv.push_back(occ);
        t.dis_cv.push_back(dis);
        t.dis_max_cv.push_back(max_distance(f, config));
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

bool is_missed(const BBox3D& gt_box, const DetectionSet& detections, double gamma) {
  return std::none_of(detections.detections.begin(), detections.detections.end(),
                      [&](const Detection& d) { return iou_bev(gt_box, d.box) > gamma; });
}

double f_op(std::span<const ObjectTerms> terms, std::span<const bool> missed) {
  double sum = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!missed[i]) continue;
    double term = terms[i].occ_ego;
    for (double occ : terms[i].occ_cv) term *= 1 - occ;
    sum += term;
  }
  return sum;
}

double f_lp(std::span<const ObjectTerms> terms, std::span<const bool> missed) {
  double sum = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!missed[i]) continue;
    const ObjectTerms& t = terms[i];
    double term = std::min(t.dis_ego, t.dis_max_ego) / t.dis_max_ego;
    for (std::size_t k = 0; k < t.dis_cv.size(); ++k) term *= 1 - std::min(t.dis_cv[k], t.dis_max_cv[k]) / t.dis_max_cv[k];
    sum += term;
  }
  return sum;
}

double fitness(double f_op_score, double f_lp_score, const FitnessConfig& config) {
  return config.alpha * f_op_score + config.beta * f_lp_score;
}

namespace {

// std::vector<bool> is not contiguous, so the flags live in a plain array.
std::unique_ptr<bool[]> missed_flags(const std::vector<ObjectTerms>& terms, const DetectionSet& detections,
                                     const FitnessConfig& config) {
  auto missed = std::make_unique<bool[]>(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    missed[i] = terms[i].dis_ego >= config.near_field && is_missed(terms[i].ego_box, detections, config.gamma);
  }
  return missed;
}

}  // namespace

FitnessBreakdown evaluate_fitness(const Scene& scene, const DetectionSet& detections, const FitnessConfig& config) {
  const auto terms = object_terms(scene, config);
  const auto flags = missed_flags(terms, detections, config);
  const std::span<const bool> missed(flags.get(), terms.size());
  FitnessBreakdown out;
  out.f_op = f_op(terms, missed);
  out.f_lp = f_lp(terms, missed);
  out.fitness = fitness(out.f_op, out.f_lp, config);
  return out;
}

double f_op(const Scene& scene, const DetectionSet& detections, const FitnessConfig& config) {
  return evaluate_fitness(scene, detections, config).f_op;
}

double f_lp(const Scene& scene, const DetectionSet& detections, const FitnessConfig& config) {
  return evaluate_fitness(scene, detections, config).f_lp;
}

}  // namespace coopscene
