#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "coopscene/geometry.hpp"
#include "coopscene/scene.hpp"

namespace coopscene {

struct Detection {
  BBox3D box;  // ego frame
  double confidence = 1;

  bool operator==(const Detection&) const = default;
};

struct DetectionSet {
  std::vector<Detection> detections;

  std::size_t size() const { return detections.size(); }
  bool empty() const { return detections.empty(); }
  bool operator==(const DetectionSet&) const = default;
};

/// A cooperative perception system under test: multi-view scene in, scored
/// boxes in the ego frame out.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectionSet detect(const Scene& scene) const = 0;
  virtual std::string name() const = 0;
};

/// Ground truth in the ego frame with confidence 1.
DetectionSet ground_truth_detections(const Scene& scene);

class PerfectDetector final : public Detector {
 public:
  DetectionSet detect(const Scene& scene) const override { return ground_truth_detections(scene); }
  std::string name() const override { return "perfect"; }
};

/// Misses each GT object independently with probability
/// p = clamp(w_o * Occ_ego + w_d * Dis_ego / Dis_max, 0, 1). The draw for an
/// object is keyed by (seed, scene id, object id), so the detector is a pure
/// function of the scene. Detected objects are reported exactly, with
/// confidence 1 - p / 2.
class DegradedOracleDetector final : public Detector {
 public:
  explicit DegradedOracleDetector(double occlusion_weight = 0.5, double distance_weight = 0.5,
                                  std::uint64_t seed = 0)
      : w_occ_(occlusion_weight), w_dist_(distance_weight), seed_(seed) {}

  DetectionSet detect(const Scene& scene) const override;
  std::string name() const override;

  /// Miss probability of every GT object, in scene order.
  std::vector<double> miss_probabilities(const Scene& scene) const;

 private:
  double w_occ_, w_dist_;
  std::uint64_t seed_;
};

/// Replays `<dir>/<scene_id>.txt` files in the detections wire format.
/// Throws protocol_violation when the file is missing or malformed.
class RecordedDetector final : public Detector {
 public:
  explicit RecordedDetector(std::filesystem::path dir) : dir_(std::move(dir)) {}
  DetectionSet detect(const Scene& scene) const override;
  std::string name() const override { return "recorded:" + dir_.string(); }

 private:
  std::filesystem::path dir_;
};

/// Runs an external command per scene (see detect_via_subprocess).
class SubprocessDetector final : public Detector {
 public:
  SubprocessDetector(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(120))
      : command_(std::move(command)), timeout_(timeout) {}
  DetectionSet detect(const Scene& scene) const override;
  std::string name() const override { return "subprocess:" + command_; }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
};

/// Wire protocol: the scene is written as a scene directory into a fresh
/// temporary bundle directory; `/bin/sh -c '<command> "$1"' sh <bundle>` is
/// run; the command must write `<bundle>/detections.txt` and exit 0. Throws
/// process_failure, timeout, or protocol_violation.
DetectionSet detect_via_subprocess(const Scene& scene, const std::string& command,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(120));

/// detections.txt: one box per line, `x y z l w h yaw confidence`, ego frame,
/// space separated, '.' decimal point. Blank lines and lines starting with
/// '#' are skipped.
DetectionSet parse_detections(std::istream& in);
DetectionSet read_detections(const std::filesystem::path& path);
void write_detections(const DetectionSet& detections, std::ostream& out);

/// Detector from a spec string: `perfect`, `degraded[:w_o=..,w_d=..,seed=..]`,
/// `recorded:<dir>`, `subprocess:<cmd>`. Throws invalid_spec.
std::unique_ptr<Detector> make_detector(std::string_view spec,
                                        std::chrono::milliseconds timeout = std::chrono::seconds(120));

}  // namespace coopscene
