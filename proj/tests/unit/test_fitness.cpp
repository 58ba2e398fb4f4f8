#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "checkers.hpp"
#include "coopscene/fitness.hpp"
#include "coopscene/generation.hpp"
#include "expect_error.hpp"
#include "literal.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace coopscene;
using namespace coopscene::testing;

namespace {

ObjectTerms terms(double occ_ego, std::vector<double> occ_cv, double dis_ego, double dis_max_ego,
                  std::vector<double> dis_cv, std::vector<double> dis_max_cv) {
  return {"obj", BBox3D(Vec3(0, 0, 0), 1, 1, 1, 0), occ_ego, dis_ego, dis_max_ego,
          std::move(occ_cv), std::move(dis_cv), std::move(dis_max_cv)};
}

// Scores written out term by term from the scene, without object_terms.
FitnessBreakdown literal_scores(const Scene& s, const DetectionSet& dets, const FitnessConfig& cfg) {
  const std::size_t ego = s.ego_index();
  FitnessBreakdown out;
  for (const auto& o : s.objects) {
    const Vec3 ego_origin = s.frames[ego].sensor_origin_world();
    if ((o.box.center() - ego_origin).norm() < cfg.near_field) continue;
    const BBox3D local = s.box_in_view(o.box, ego);
    bool hit = false;
    for (const auto& d : dets.detections) hit = hit || iou_bev(local, d.box) > cfg.gamma;
    if (hit) continue;
    double op = 1, lp = 1;
    for (std::size_t v = 0; v < s.frames.size(); ++v) {
      const auto& f = s.frames[v];
      const Vec3 origin = f.sensor_origin_world();
      const double occ = brute_occlusion(s, origin, o);
      const double dmax = cfg.dis_max.count(f.agent_id) ? cfg.dis_max.at(f.agent_id) : f.sensor.max_range;
      const double ratio = std::min((o.box.center() - origin).norm(), dmax) / dmax;
      op *= v == ego ? occ : 1 - occ;
      lp *= v == ego ? ratio : 1 - ratio;
    }
    out.f_op += op;
    out.f_lp += lp;
  }
  out.fitness = cfg.alpha * out.f_op + cfg.beta * out.f_lp;
  return out;
}

OperatorContext fast_context() {
  OperatorContext ops;
  return ops;
}

std::vector<Scene> fast_seeds(std::uint64_t first, std::size_t n) {
  std::vector<Scene> seeds;
  for (std::size_t i = 0; i < n; ++i) seeds.push_back(make_synthetic(fast_options(first + i)).scene);
  return seeds;
}

TestCase case_with(double fitness, std::size_t index) {
  TestCase tc;
  tc.fitness = fitness;
  tc.seed_index = index;
  return tc;
}

}  // namespace

TEST(IsMissed, EmptyIdenticalAndThreshold) {
  const BBox3D gt(Vec3(10, 0, 0.75), 4, 2, 1.5, 0);
  EXPECT_TRUE(is_missed(gt, {}, 0.5));
  EXPECT_FALSE(is_missed(gt, {{{gt, 0.9}}}, 0.5));
  // Shifted by 1 m along x: overlap 3x2 over union 10.
  const BBox3D shifted(Vec3(11, 0, 0.75), 4, 2, 1.5, 0);
  const double iou = iou_bev(gt, shifted);
  EXPECT_NEAR(iou, 6.0 / 10.0, 1e-12);
  EXPECT_TRUE(is_missed(gt, {{{shifted, 1}}}, iou));
  EXPECT_FALSE(is_missed(gt, {{{shifted, 1}}}, std::nextafter(iou, 0.0)));
}

TEST(FitnessTerms, ClosedForms) {
  const std::vector<ObjectTerms> t = {terms(1.0, {0.2}, 50, 100, {25}, {100}),
                                      terms(0.5, {0.6}, 200, 100, {100}, {50})};
  const bool both[] = {true, true};
  const bool first[] = {true, false};
  const bool none[] = {false, false};
  // 1 * 0.8 + 0.5 * 0.4 and 0.5 * 0.75 + 1 * 0
  EXPECT_NEAR(f_op(t, both), 1.0, 1e-12);
  EXPECT_NEAR(f_op(t, first), 0.8, 1e-12);
  EXPECT_NEAR(f_lp(t, both), 0.375, 1e-12);
  EXPECT_NEAR(f_lp(t, first), 0.375, 1e-12);
  EXPECT_EQ(f_op(t, none), 0);
  EXPECT_EQ(f_lp(t, none), 0);

  const std::vector<ObjectTerms> solo = {terms(0.2, {}, 100, 100, {}, {}), terms(1, {0.75}, 25, 100, {50}, {100})};
  const bool s0[] = {true, false};
  const bool s1[] = {false, true};
  EXPECT_NEAR(f_op(solo, s0), 0.2, 1e-12);
  EXPECT_NEAR(f_lp(solo, s0), 1.0, 1e-12);
  EXPECT_NEAR(f_op(solo, s1), 0.25, 1e-12);
  EXPECT_NEAR(f_lp(solo, s1), 0.125, 1e-12);

  FitnessConfig cfg;
  EXPECT_NEAR(fitness(0.8, 0.2, cfg), 0.5, 1e-12);
  cfg.alpha = 1;
  cfg.beta = 0;
  EXPECT_EQ(fitness(0.8, 0.2, cfg), 0.8);
  cfg.alpha = 0;
  cfg.beta = 1;
  EXPECT_EQ(fitness(0.8, 0.2, cfg), 0.2);
}

TEST(FitnessConfig, Validation) {
  FitnessConfig ok;
  EXPECT_NO_THROW(ok.validate());
  auto with = [](auto edit) {
    FitnessConfig c;
    edit(c);
    return c;
  };
  EXPECT_ERRC(with([](auto& c) { c.alpha = 0.6; }).validate(), Errc::invalid_parameter);
  EXPECT_ERRC(with([](auto& c) { c.alpha = -0.5, c.beta = 1.5; }).validate(), Errc::invalid_parameter);
  EXPECT_ERRC(with([](auto& c) { c.gamma = 0; }).validate(), Errc::invalid_parameter);
  EXPECT_ERRC(with([](auto& c) { c.gamma = 1; }).validate(), Errc::invalid_parameter);
  EXPECT_ERRC(with([](auto& c) { c.k_longrange = 0; }).validate(), Errc::invalid_parameter);
  EXPECT_ERRC(with([](auto& c) { c.near_field = -1; }).validate(), Errc::invalid_parameter);
  EXPECT_ERRC(with([](auto& c) { c.dis_max["ego"] = 0; }).validate(), Errc::invalid_parameter);
  EXPECT_NO_THROW(with([](auto& c) { c.alpha = 0.3, c.beta = 0.7; }).validate());
}

TEST(SceneFitness, PerfectDetectorScoresZero) {
  const FitnessConfig cfg;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Scene s = make_synthetic(fast_options(seed)).scene;
    const auto score = evaluate_fitness(s, PerfectDetector().detect(s), cfg);
    EXPECT_EQ(score.f_op, 0);
    EXPECT_EQ(score.f_lp, 0);
    EXPECT_EQ(score.fitness, 0);
  }
}

TEST(SceneFitness, MatchesLiteralOracle) {
  FitnessConfig cfg;
  cfg.alpha = 0.3;
  cfg.beta = 0.7;
  cfg.dis_max["cav1"] = 60;
  for (std::uint64_t seed : {4, 5, 6, 7}) {
    const Scene s = make_synthetic(fast_options(seed)).scene;
    ASSERT_FALSE(s.objects.empty());
    const DetectionSet none;
    const auto got = evaluate_fitness(s, none, cfg);
    const auto want = literal_scores(s, none, cfg);
    EXPECT_NEAR(got.f_op, want.f_op, 1e-9) << seed;
    EXPECT_NEAR(got.f_lp, want.f_lp, 1e-9) << seed;
    EXPECT_NEAR(got.fitness, want.fitness, 1e-9) << seed;
    EXPECT_EQ(f_op(s, none, cfg), got.f_op);
    EXPECT_EQ(f_lp(s, none, cfg), got.f_lp);

    // Half the objects detected.
    DetectionSet half;
    const auto gt = ground_truth_detections(s);
    for (std::size_t i = 0; i < gt.size(); i += 2) half.detections.push_back(gt.detections[i]);
    const auto got_half = evaluate_fitness(s, half, cfg);
    const auto want_half = literal_scores(s, half, cfg);
    EXPECT_NEAR(got_half.f_op, want_half.f_op, 1e-9);
    EXPECT_NEAR(got_half.f_lp, want_half.f_lp, 1e-9);
  }
}

TEST(SceneFitness, NearFieldObjectsAreSkipped) {
  Scene s = make_synthetic(fast_options(8)).scene;
  const Vec3 ego_sensor = s.ego().sensor_origin_world();
  s.objects.push_back({BBox3D(Vec3(ego_sensor.x(), ego_sensor.y(), ego_sensor.z()), 0.5, 0.5, 0.5, 0), "close", "car"});
  FitnessConfig cfg;
  const DetectionSet none;
  const auto with_close = evaluate_fitness(s, none, cfg);
  Scene without = s;
  without.objects.pop_back();
  const auto base = evaluate_fitness(without, none, cfg);
  // The enclosing box is not an occluder for the ego and is itself skipped.
  EXPECT_NEAR(with_close.f_lp, base.f_lp, 1e-12);
  EXPECT_NEAR(with_close.f_lp, literal_scores(s, none, cfg).f_lp, 1e-9);
  cfg.near_field = 0;
  EXPECT_GE(evaluate_fitness(s, none, cfg).f_op + 1e-12, base.f_op);
}

TEST(SceneFitness, MonotoneInMisses) {
  const FitnessConfig cfg;
  const Scene s = make_synthetic(fast_options(9)).scene;
  const auto gt = ground_truth_detections(s);
  double prev_op = -1, prev_lp = -1;
  // Drop detections one at a time: every score is non-decreasing.
  for (std::size_t keep = gt.size() + 1; keep-- > 0;) {
    DetectionSet d;
    d.detections.assign(gt.detections.begin(), gt.detections.begin() + static_cast<std::ptrdiff_t>(keep));
    const auto score = evaluate_fitness(s, d, cfg);
    EXPECT_GE(score.f_op, prev_op - 1e-12);
    EXPECT_GE(score.f_lp, prev_lp - 1e-12);
    EXPECT_GE(score.f_op, 0);
    EXPECT_LE(score.f_op, static_cast<double>(gt.size() - keep) + 1e-12);
    EXPECT_LE(score.f_lp, static_cast<double>(gt.size() - keep) + 1e-12);
    prev_op = score.f_op;
    prev_lp = score.f_lp;
  }
}

TEST(TopKBuffer, MatchesSortedPrefix) {
  Rng rng = Rng::keyed(42, {});
  for (std::size_t capacity : {0u, 1u, 3u, 10u, 50u}) {
    TopKBuffer buf(capacity);
    std::vector<TestCase> all;
    for (std::size_t i = 0; i < 40; ++i) {
      // Coarse values force ties.
      auto tc = case_with(static_cast<double>(rng.index(8)) / 4.0, i);
      all.push_back(tc);
      buf.offer(std::move(tc));
    }
    std::stable_sort(all.begin(), all.end(), [](const TestCase& a, const TestCase& b) {
      return a.fitness != b.fitness ? a.fitness > b.fitness : a.seed_index < b.seed_index;
    });
    all.resize(std::min(capacity, all.size()));
    ASSERT_EQ(buf.cases().size(), all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      EXPECT_EQ(buf.cases()[i].seed_index, all[i].seed_index) << capacity << " " << i;
      EXPECT_EQ(buf.cases()[i].fitness, all[i].fitness);
    }
  }
}

TEST(TopKBuffer, EqualFitnessDoesNotEvict) {
  TopKBuffer buf(2);
  EXPECT_TRUE(buf.offer(case_with(1, 0)));
  EXPECT_TRUE(buf.offer(case_with(1, 1)));
  EXPECT_FALSE(buf.offer(case_with(1, 2)));
  EXPECT_TRUE(buf.offer(case_with(1.5, 3)));
  ASSERT_EQ(buf.cases().size(), 2u);
  EXPECT_EQ(buf.cases()[0].seed_index, 3u);
  EXPECT_EQ(buf.cases()[1].seed_index, 0u);
}

TEST(GenerationConfig, Validation) {
  GenerationConfig ok;
  EXPECT_NO_THROW(ok.validate());
  GenerationConfig c = ok;
  c.gen_num = 0;
  EXPECT_ERRC(c.validate(), Errc::invalid_parameter);
  c = ok;
  c.operators.clear();
  EXPECT_ERRC(c.validate(), Errc::invalid_parameter);
  c = ok;
  c.max_manipulations = 0;
  EXPECT_ERRC(c.validate(), Errc::invalid_parameter);
  c = ok;
  c.max_attempts = 0;
  EXPECT_ERRC(c.validate(), Errc::invalid_parameter);
}

TEST(Generate, EqualsExhaustiveTopK) {
  const auto seeds = fast_seeds(100, 12);
  const DegradedOracleDetector detector(0.6, 0.6, 3);
  const FitnessConfig fcfg;
  GenerationConfig gcfg;
  gcfg.gen_num = 4;
  gcfg.master_seed = 77;
  gcfg.operators = {OperatorKind::insertion, OperatorKind::deletion};
  const auto ops = fast_context();

  std::vector<TestCase> oracle;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto outcome = transform_and_score(seeds[i], i, detector, ops, fcfg, gcfg);
    if (outcome.test_case) oracle.push_back(std::move(*outcome.test_case));
  }
  std::stable_sort(oracle.begin(), oracle.end(), [](const TestCase& a, const TestCase& b) {
    return a.fitness != b.fitness ? a.fitness > b.fitness : a.seed_index < b.seed_index;
  });
  ASSERT_GT(oracle.size(), gcfg.gen_num);
  oracle.resize(gcfg.gen_num);

  const auto result = generate(seeds, detector, ops, fcfg, gcfg);
  ASSERT_EQ(result.cases.size(), gcfg.gen_num);
  for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_EQ(result.cases[i], oracle[i]) << i;
  for (std::size_t i = 1; i < result.cases.size(); ++i) {
    EXPECT_GE(result.cases[i - 1].fitness, result.cases[i].fitness);
  }
  for (const auto& tc : result.cases) {
    EXPECT_EQ(tc.ops_log.size(), static_cast<std::size_t>(gcfg.max_manipulations));
    EXPECT_EQ(tc.scene.scene_id, seeds[tc.seed_index].scene_id + ".gen" + std::to_string(tc.seed_index));
    const auto score = evaluate_fitness(tc.scene, detector.detect(tc.scene), fcfg);
    EXPECT_EQ(tc.fitness, score.fitness);
  }
}

TEST(Generate, KeepsEverySeedWhenBudgetAllows) {
  const auto seeds = fast_seeds(200, 5);
  GenerationConfig gcfg;
  gcfg.gen_num = 8;
  gcfg.operators = {OperatorKind::insertion};
  const auto result = generate(seeds, PerfectDetector(), fast_context(), FitnessConfig{}, gcfg);
  EXPECT_EQ(result.cases.size() + result.log.size(), seeds.size());
  EXPECT_EQ(result.cases.size(), seeds.size());
  // All fitness 0: ties keep seed order.
  for (std::size_t i = 0; i < result.cases.size(); ++i) {
    EXPECT_EQ(result.cases[i].fitness, 0);
    EXPECT_EQ(result.cases[i].seed_index, i);
  }
}

TEST(Generate, PerfectDetectorKeepsFirstSeeds) {
  const auto seeds = fast_seeds(300, 6);
  GenerationConfig gcfg;
  gcfg.gen_num = 3;
  gcfg.operators = {OperatorKind::insertion, OperatorKind::deletion};
  const auto result = generate(seeds, PerfectDetector(), fast_context(), FitnessConfig{}, gcfg);
  ASSERT_EQ(result.cases.size(), 3u);
  std::vector<std::size_t> got;
  for (const auto& tc : result.cases) got.push_back(tc.seed_index);
  EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
  EXPECT_EQ(got.front(), 0u);
}

TEST(Generate, IndependentOfWorkerCount) {
  const auto seeds = fast_seeds(400, 10);
  const DegradedOracleDetector detector(0.5, 0.5, 11);
  GenerationConfig gcfg;
  gcfg.gen_num = 5;
  gcfg.master_seed = 5;
  gcfg.workers = 1;
  const auto one = generate(seeds, detector, fast_context(), FitnessConfig{}, gcfg);
  gcfg.workers = 4;
  const auto four = generate(seeds, detector, fast_context(), FitnessConfig{}, gcfg);
  EXPECT_EQ(one.cases, four.cases);
  EXPECT_EQ(one.log, four.log);
}

TEST(Generate, LogsSeedsThatCannotBeTransformed) {
  auto seeds = fast_seeds(500, 3);
  seeds[1].objects.clear();  // nothing to delete
  GenerationConfig gcfg;
  gcfg.gen_num = 5;
  gcfg.max_attempts = 3;
  gcfg.operators = {OperatorKind::deletion};
  gcfg.max_manipulations = 1;
  const auto result = generate(seeds, PerfectDetector(), fast_context(), FitnessConfig{}, gcfg);
  ASSERT_EQ(result.log.size(), 1u);
  EXPECT_NE(result.log[0].find(seeds[1].scene_id), std::string::npos) << result.log[0];
  EXPECT_EQ(result.cases.size(), 2u);
  for (const auto& tc : result.cases) EXPECT_NE(tc.seed_index, 1u);
}
