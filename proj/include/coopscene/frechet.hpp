#pragma once

#include <Eigen/Dense>

#include "coopscene/point_cloud.hpp"
#include "coopscene/scene.hpp"

namespace coopscene {

/// Mean and covariance of a feature population.
struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  /// One sample per row; unbiased covariance (zero for a single sample).
  static GaussianSummary from_samples(const Eigen::MatrixXd& samples);

  /// Symmetric to 1e-9 with eigenvalues >= -1e-9.
  bool valid() const;
};

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). The trace of the
/// cross term is evaluated as Tr((S_a^(1/2) S_b S_a^(1/2))^(1/2)) with
/// symmetric eigendecompositions; eigenvalues within round-off of zero (or
/// negative) are treated as 0.
/// Throws dimension_mismatch.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);

/// Symmetric PSD square root via eigendecomposition.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m);

/// Range-image statistics of a cloud, 2 * beams + 20 values:
///   [0, B)        per-beam fill: occupied azimuth cells / azimuth_count
///   [B, 2B)       per-beam mean range / max_range (0 for empty beams)
///   2B + 0        mean range / max_range
///   2B + 1        variance of range / max_range
///   2B + 2..17    16-bin histogram of range / max_range over [0, 1], as fractions
///   2B + 18       mean z relative to the sensor, / max_range
///   2B + 19       mean intensity
/// Points are assigned to the nearest beam elevation. Throws empty_cloud.
Eigen::VectorXd range_feature_extract(const PointCloud& cloud, const SensorConfig& sensor);

std::size_t range_feature_dimension(const SensorConfig& sensor);

}  // namespace coopscene
