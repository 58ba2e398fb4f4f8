#include "coopscene/evaluation.hpp"

#include <algorithm>
#include <set>

#include "coopscene/metrics.hpp"
#include "coopscene/parallel.hpp"

namespace coopscene {

std::optional<Lineage> insert_delete_lineage(const Scene& seed, const TestCase& test_case) {
  std::set<std::string> inserted, deleted;
  for (const auto& op : test_case.ops_log) {
    if (op.kind == OperatorKind::insertion) {
      inserted.insert(op.target);
    } else if (op.kind == OperatorKind::deletion) {
      if (inserted.erase(op.target) == 0) deleted.insert(op.target);
    } else {
      return std::nullopt;
    }
  }
  Lineage out;
  for (const auto& o : test_case.scene.objects) {
    if (inserted.count(o.object_id)) out.added.push_back(o.box);
  }
  for (const auto& o : seed.objects) {
    if (deleted.count(o.object_id)) out.removed.push_back(o.box);
  }
  return out;
}

namespace {

struct CaseOutcome {
  CaseReport report;
  EvaluationSample sample;
  bool ok = false;
};

std::vector<BBox3D> ego_boxes(const Scene& scene, std::span<const BBox3D> world) {
  const std::size_t ego = scene.ego_index();
  std::vector<BBox3D> out;
  out.reserve(world.size());
  for (const auto& b : world) out.push_back(scene.box_in_view(b, ego));
  return out;
}

CaseOutcome evaluate_one(const CaseInput& input, const Detector& detector, const EvaluationOptions& options) {
  CaseOutcome out;
  const TestCase& tc = input.test_case;
  out.report.case_name = input.name;
  out.report.fitness = tc.fitness;
  for (const auto& op : tc.ops_log) out.report.operators.emplace_back(to_string(op.kind));
  try {
    const DetectionSet detections = detector.detect(tc.scene);
    out.report.errors = count_errors(tc.scene, detections, options.fitness);
    std::vector<BBox3D> world;
    for (const auto& o : tc.scene.objects) world.push_back(o.box);
    out.sample = {detections, ego_boxes(tc.scene, world)};

    if (input.seed) {
      if (const auto lineage = insert_delete_lineage(*input.seed, tc)) {
        const DetectionSet before = detector.detect(*input.seed);
        const auto added = ego_boxes(tc.scene, lineage->added);
        const auto removed = ego_boxes(*input.seed, lineage->removed);
        const MrVerdict v = mr_check(before, added, removed, detections, options.epsilon, options.fitness.gamma);
        out.report.mr_checked = true;
        out.report.mr_violated = v.violated;
        out.report.mr_ap_reference = v.ap_reference;
        out.report.mr_ap_transformed = v.ap_transformed;
      }
    }
    out.ok = true;
  } catch (const Error& e) {
    if (e.code() != Errc::protocol_violation) throw;
    out.report = CaseReport{};
    out.report.case_name = input.name;
    out.report.fitness = tc.fitness;
    for (const auto& op : tc.ops_log) out.report.operators.emplace_back(to_string(op.kind));
    out.report.status = e.what();
  }
  return out;
}

}  // namespace

EvaluationReport evaluate_cases(std::span<const CaseInput> cases, const Detector& detector,
                                const EvaluationOptions& options) {
  options.fitness.validate();
  std::vector<CaseOutcome> outcomes(cases.size());
  parallel_for(cases.size(), resolve_workers(options.workers),
               [&](std::size_t i) { outcomes[i] = evaluate_one(cases[i], detector, options); });

  EvaluationReport report;
  report.detector = detector.name();
  std::vector<EvaluationSample> samples;
  for (auto& o : outcomes) {
    if (o.ok) {
      samples.push_back(std::move(o.sample));
      report.totals += o.report.errors;
      report.mr_checked += o.report.mr_checked;
      report.mr_violations += o.report.mr_violated;
      std::set<std::string> ops(o.report.operators.begin(), o.report.operators.end());
      for (const auto& op : ops) {
        OperatorBreakdown& b = report.per_operator[op];
        ++b.cases;
        b.oe += o.report.errors.oe;
        b.le += o.report.errors.le;
        b.mr_violations += o.report.mr_violated;
      }
    }
    report.cases.push_back(std::move(o.report));
  }
  report.totals.finalize_rates();
  report.ap = ap_r11(samples, options.fitness.gamma);
  return report;
}

}  // namespace coopscene
