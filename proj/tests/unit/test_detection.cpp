#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "checkers.hpp"
#include "coopscene/detection.hpp"
#include "coopscene/fitness.hpp"
#include "expect_error.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace coopscene;
using namespace coopscene::testing;

namespace {

std::string stub(const std::string& flags = "") {
  return std::string("python3 ") + COOPSCENE_STUB_DIR + "/gt_detector.py " + flags;
}

DetectionSet parse(const std::string& text) {
  std::istringstream in(text);
  return parse_detections(in);
}

double independent_occlusion(const Scene& s, const Vec3& origin, const GroundTruthObject& target) {
  std::vector<Triangle> occluders;
  for (const auto& o : s.objects) {
    if (o.object_id == target.object_id || inside_box(origin, o.box, 0)) continue;
    const auto t = cuboid(o.box);
    occluders.insert(occluders.end(), t.begin(), t.end());
  }
  const auto samples = occlusion_samples(origin, target.box);
  int blocked = 0;
  for (const auto& p : samples) blocked += segment_blocked(origin, p, occluders) ? 1 : 0;
  return static_cast<double>(blocked) / static_cast<double>(samples.size());
}

}  // namespace

TEST(WireFormat, ParsesCommentsAndBlankLines) {
  const auto d = parse("# header\n\n1 2 3 4.5 1.8 1.5 0.25 0.9\r\n  \t\n-1e1 0 0.5 1 1 1 -3 0\n");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.detections[0].box, BBox3D(Vec3(1, 2, 3), 4.5, 1.8, 1.5, 0.25));
  EXPECT_EQ(d.detections[0].confidence, 0.9);
  EXPECT_EQ(d.detections[1].box.center().x(), -10);
  EXPECT_EQ(d.detections[1].confidence, 0);
  EXPECT_TRUE(parse("").empty());
}

TEST(WireFormat, RejectsMalformedLines) {
  for (const char* bad : {"1 2 3 4 5 6 7\n", "1 2 3 4 5 6 7 0.5 9\n", "1 2 3 4 5 6 seven 0.5\n", "1,5 2 3 4 5 6 7 0.5\n",
                          "1 2 3 4 5 6 7 1.5\n", "1 2 3 4 5 6 7 -0.1\n", "1 2 3 0 5 6 7 0.5\n", "nan 2 3 4 5 6 7 0.5\n",
                          "1 2 3 4 5 6 inf 0.5\n"}) {
    EXPECT_ERRC(parse(bad), Errc::protocol_violation) << bad;
  }
  try {
    parse("1 2 3 4 5 6 7 0.5\n1 2 3\n");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(WireFormat, RoundTripIsExact) {
  DetectionSet d;
  d.detections.push_back({BBox3D(Vec3(0.1, -2.0 / 3, 1e-7), 4.123456789012345, 1.8, 1.5, 3.0), 0.123456789});
  d.detections.push_back({BBox3D(Vec3(1e5, 2, 3), 1, 2, 3, -1), 1});
  std::ostringstream out;
  write_detections(d, out);
  EXPECT_EQ(parse(out.str()), d);
}

TEST(DetectorSpecs, Factory) {
  EXPECT_EQ(make_detector("perfect")->name(), "perfect");
  EXPECT_EQ(make_detector("degraded")->name(), "degraded:w_o=0.5,w_d=0.5,seed=0");
  EXPECT_EQ(make_detector("degraded:w_o=0.25,seed=7")->name(), "degraded:w_o=0.25,w_d=0.5,seed=7");
  EXPECT_EQ(make_detector("recorded:/tmp/x")->name(), "recorded:/tmp/x");
  EXPECT_EQ(make_detector("subprocess:run it")->name(), "subprocess:run it");
  for (const char* bad : {"", "perfect:x", "degraded:w_o", "degraded:w_o=abc", "degraded:w_x=1", "degraded:w_o=-1",
                          "degraded:seed=-3", "recorded:", "subprocess:", "yolo"}) {
    EXPECT_ERRC(make_detector(bad), Errc::invalid_spec) << bad;
  }
}

TEST(Detectors, PerfectReturnsGroundTruthInEgoFrame) {
  const Scene s = minimal_scene();
  const auto d = PerfectDetector().detect(s);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.detections[0].box, s.box_in_view(s.objects[0].box, s.ego_index()));
  EXPECT_EQ(d.detections[0].confidence, 1.0);
}

TEST(Detectors, DegradedMissProbabilitiesFollowTheFormula) {
  const Scene s = make_synthetic_scene(fast_options(3));
  const DegradedOracleDetector det(0.6, 0.3, 1);
  const auto p = det.miss_probabilities(s);
  ASSERT_EQ(p.size(), s.objects.size());
  const AgentFrame& ego = s.ego();
  const Vec3 origin = ego.sensor_origin_world();
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const double occ = independent_occlusion(s, origin, s.objects[i]);
    const double dis = (s.objects[i].box.center() - origin).norm();
    EXPECT_NEAR(p[i], std::clamp(0.6 * occ + 0.3 * dis / ego.sensor.max_range, 0.0, 1.0), 1e-12) << i;
  }
}

TEST(Detectors, DegradedIsPureAndSeeded) {
  const Scene s = make_synthetic_scene(fast_options(4));
  const DegradedOracleDetector a(0.5, 0.5, 11), b(0.5, 0.5, 11);
  EXPECT_EQ(a.detect(s), b.detect(s));
  const auto p = a.miss_probabilities(s);
  for (const auto& d : a.detect(s).detections) {
    EXPECT_GE(d.confidence, 0.5);
    EXPECT_LE(d.confidence, 1.0);
  }
  // miss frequency over many seeds tracks the probability
  const std::size_t n = 400;
  std::vector<int> missed(s.objects.size(), 0);
  for (std::uint64_t seed = 0; seed < n; ++seed) {
    const auto d = DegradedOracleDetector(0.5, 0.5, seed).detect(s);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      missed[i] += is_missed(s.box_in_view(s.objects[i].box, s.ego_index()), d, 0.5) ? 1 : 0;
    }
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const double sd = std::sqrt(p[i] * (1 - p[i]) / n);
    EXPECT_NEAR(missed[i] / double(n), p[i], 5 * sd + 1e-9) << i;
  }
}

TEST(Detectors, RecordedReplaysFiles) {
  const TempDir dir;
  const Scene s = minimal_scene();
  {
    std::ofstream out(dir / (s.scene_id + ".txt"));
    out << "1 2 3 4 5 6 0.5 0.75\n";
  }
  const auto d = RecordedDetector(dir.path()).detect(s);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.detections[0].confidence, 0.75);
  Scene other = s;
  other.scene_id = "absent";
  EXPECT_ERRC(RecordedDetector(dir.path()).detect(other), Errc::protocol_violation);
}

TEST(Subprocess, EchoStubReturnsGroundTruth) {
  const Scene s = make_synthetic_scene(fast_options(5));
  const auto d = detect_via_subprocess(s, stub());
  const auto gt = ground_truth_detections(s);
  ASSERT_EQ(d.size(), gt.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR((d.detections[i].box.center() - gt.detections[i].box.center()).norm(), 0, 1e-9);
    EXPECT_EQ(d.detections[i].box.dims(), gt.detections[i].box.dims());
    EXPECT_NEAR(d.detections[i].box.yaw(), gt.detections[i].box.yaw(), 1e-9);
    EXPECT_EQ(d.detections[i].confidence, 1.0);
  }
}

TEST(Subprocess, RangeLimitedStubMissesExactlyTheFarObjects) {
  int far = 0, near = 0;
  for (std::uint64_t seed = 6; seed < 20 && (far == 0 || near == 0); ++seed) {
    const Scene s = make_synthetic_scene(fast_options(seed));
    const auto d = make_detector("subprocess:" + stub("--max-range 50"))->detect(s);
    const Vec3 origin = s.ego().sensor.origin();
    for (const auto& o : s.objects) {
      const BBox3D local = s.box_in_view(o.box, s.ego_index());
      const bool is_far = (local.center() - origin).norm() > 50;
      (is_far ? far : near) += 1;
      EXPECT_EQ(is_missed(local, d, 0.5), is_far) << o.object_id;
    }
  }
  EXPECT_GT(far, 0);
  EXPECT_GT(near, 0);
}

TEST(Subprocess, FailuresMapToErrorCodes) {
  const Scene s = minimal_scene();
  EXPECT_ERRC(detect_via_subprocess(s, stub("--malformed")), Errc::protocol_violation);
  EXPECT_ERRC(detect_via_subprocess(s, stub("--silent")), Errc::protocol_violation);
  EXPECT_ERRC(detect_via_subprocess(s, stub("--exit 4")), Errc::process_failure);
  EXPECT_ERRC(detect_via_subprocess(s, "/nonexistent/detector"), Errc::process_failure);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_ERRC(detect_via_subprocess(s, stub("--sleep 30"), std::chrono::milliseconds(300)), Errc::timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
}
