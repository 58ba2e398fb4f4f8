#include "coopscene/frechet.hpp"

#include <algorithm>
#include <cmath>

#include "coopscene/error.hpp"

namespace coopscene {

namespace {

// Eigenvalues within round-off of zero are set to zero before taking roots:
// sqrt would amplify 1e-16 noise to 1e-8.
Eigen::VectorXd clamped_roots(const Eigen::VectorXd& eigenvalues) {
  const double scale = eigenvalues.cwiseAbs().maxCoeff();
  const double floor = scale * 1e-13 * static_cast<double>(eigenvalues.size());
  return eigenvalues.unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
}

}  // namespace

GaussianSummary GaussianSummary::from_samples(const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0) throw Error(Errc::invalid_parameter, "no samples");
  GaussianSummary out;
  out.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();
  out.covariance = samples.rows() > 1 ? Eigen::MatrixXd(centered.transpose() * centered / double(samples.rows() - 1))
                                      : Eigen::MatrixXd::Zero(samples.cols(), samples.cols());
  return out;
}

bool GaussianSummary::valid() const {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) return false;
  if (!mean.allFinite() || !covariance.allFinite()) return false;
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
  if (mean.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-9;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = (m + m.transpose()) / 2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd roots = clamped_roots(eig.eigenvalues());
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  const auto n = a.mean.size();
  if (b.mean.size() != n || a.covariance.rows() != n || a.covariance.cols() != n || b.covariance.rows() != n ||
      b.covariance.cols() != n) {
    throw Error(Errc::dimension_mismatch, "Gaussian summaries have different dimensions");
  }
  const double mean_term = (a.mean - b.mean).squaredNorm();
  if (n == 0) return mean_term;
  const Eigen::MatrixXd root_a = sqrt_psd(a.covariance);
  const Eigen::MatrixXd cross = root_a * b.covariance * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((cross + cross.transpose()) / 2, Eigen::EigenvaluesOnly);
  const double cross_trace = clamped_roots(eig.eigenvalues()).sum();
  const double d = mean_term + a.covariance.trace() + b.covariance.trace() - 2 * cross_trace;
  return std::max(d, 0.0);
}

std::size_t range_feature_dimension(const SensorConfig& sensor) { return 2 * sensor.beam_elevations.size() + 20; }

Eigen::VectorXd range_feature_extract(const PointCloud& cloud, const SensorConfig& sensor) {
  if (cloud.empty()) throw Error(Errc::empty_cloud, "cannot extract range features from an empty cloud");
  const std::size_t beams = sensor.beam_elevations.size();
  const std::size_t azimuths = sensor.azimuth_count();
  const double max_range = sensor.max_range;
  const Vec3 origin = sensor.origin();

  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * beams + 20));
  std::vector<char> occupied(beams * azimuths, 0);
  std::vector<std::size_t> per_beam(beams, 0);
  std::vector<double> ranges;
  ranges.reserve(cloud.size());
  double z_sum = 0, intensity_sum = 0;
  for (const auto& p : cloud.points) {
    const Vec3 rel = p.position - origin;
    const double range = rel.norm();
    const double elevation = range > 0 ? std::asin(std::clamp(rel.z() / range, -1.0, 1.0)) : 0.0;
    const auto it = std::lower_bound(sensor.beam_elevations.begin(), sensor.beam_elevations.end(), elevation);
    std::size_t beam = static_cast<std::size_t>(it - sensor.beam_elevations.begin());
    if (beam == beams || (beam > 0 && elevation - sensor.beam_elevations[beam - 1] < *it - elevation)) --beam;
    const double azimuth = std::atan2(rel.y(), rel.x());
    const auto n = static_cast<long long>(azimuths);
    const long long cell = ((std::llround(azimuth / sensor.azimuth_step) % n) + n) % n;
    occupied[beam * azimuths + static_cast<std::size_t>(cell)] = 1;

    const double r = range / max_range;
    ranges.push_back(r);
    f[static_cast<Eigen::Index>(beams + beam)] += r;
    ++per_beam[beam];
    z_sum += rel.z();
    intensity_sum += p.intensity;
  }
  for (std::size_t b = 0; b < beams; ++b) {
    std::size_t filled = 0;
    for (std::size_t a = 0; a < azimuths; ++a) filled += occupied[b * azimuths + a];
    f[static_cast<Eigen::Index>(b)] = static_cast<double>(filled) / static_cast<double>(azimuths);
    if (per_beam[b]) f[static_cast<Eigen::Index>(beams + b)] /= static_cast<double>(per_beam[b]);
  }
  const double count = static_cast<double>(cloud.size());
  double mean = 0;
  for (double r : ranges) mean += r;
  mean /= count;
  double var = 0;
  for (double r : ranges) var += (r - mean) * (r - mean);
  var /= count;
  const auto base = static_cast<Eigen::Index>(2 * beams);
  f[base] = mean;
  f[base + 1] = var;
  for (double r : ranges) {
    const int bin = std::clamp(static_cast<int>(std::floor(std::clamp(r, 0.0, 1.0) * 16)), 0, 15);
    f[base + 2 + bin] += 1.0 / count;
  }
  f[base + 18] = z_sum / count / max_range;
  f[base + 19] = intensity_sum / count;
  return f;
}

}  // namespace coopscene
