#include "coopscene/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "coopscene/error.hpp"

namespace coopscene {

using nlohmann::json;

bool operator==(const ErrorCounts& a, const ErrorCounts& b) {
  return a.oe == b.oe && a.le == b.le && a.occluded == b.occluded && a.far == b.far &&
         a.ground_truth == b.ground_truth && a.missed == b.missed && a.oer == b.oer && a.ler == b.ler;
}

namespace {

json counts_to_json(const ErrorCounts& c) {
  return {{"oe", c.oe},         {"le", c.le},     {"occluded", c.occluded}, {"far", c.far},
          {"ground_truth", c.ground_truth}, {"missed", c.missed}, {"oer", c.oer}, {"ler", c.ler}};
}

ErrorCounts counts_from_json(const json& j) {
  ErrorCounts c;
  c.oe = j.at("oe").get<std::size_t>();
  c.le = j.at("le").get<std::size_t>();
  c.occluded = j.at("occluded").get<std::size_t>();
  c.far = j.at("far").get<std::size_t>();
  c.ground_truth = j.at("ground_truth").get<std::size_t>();
  c.missed = j.at("missed").get<std::size_t>();
  c.oer = j.at("oer").get<double>();
  c.ler = j.at("ler").get<double>();
  return c;
}

json to_json(const EvaluationReport& r) {
  json cases = json::array();
  for (const auto& c : r.cases) {
    cases.push_back({{"case", c.case_name},
                     {"status", c.status},
                     {"operators", c.operators},
                     {"fitness", c.fitness},
                     {"errors", counts_to_json(c.errors)},
                     {"mr", {{"checked", c.mr_checked},
                             {"violated", c.mr_violated},
                             {"ap_reference", c.mr_ap_reference},
                             {"ap_transformed", c.mr_ap_transformed}}}});
  }
  json per_op = json::object();
  for (const auto& [op, b] : r.per_operator) {
    per_op[op] = {{"cases", b.cases}, {"oe", b.oe}, {"le", b.le}, {"mr_violations", b.mr_violations}};
  }
  return {{"schema_version", r.schema_version},
          {"detector", r.detector},
          {"ap", r.ap},
          {"totals", counts_to_json(r.totals)},
          {"mr", {{"checked", r.mr_checked}, {"violations", r.mr_violations}}},
          {"per_operator", per_op},
          {"cases", cases}};
}

EvaluationReport from_json(const json& j) {
  EvaluationReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kReportSchemaVersion) {
    throw Error(Errc::malformed_file, "unsupported report schema version " + std::to_string(r.schema_version));
  }
  r.detector = j.at("detector").get<std::string>();
  r.ap = j.at("ap").get<double>();
  r.totals = counts_from_json(j.at("totals"));
  r.mr_checked = j.at("mr").at("checked").get<std::size_t>();
  r.mr_violations = j.at("mr").at("violations").get<std::size_t>();
  for (const auto& [op, b] : j.at("per_operator").items()) {
    r.per_operator[op] = {b.at("cases").get<std::size_t>(), b.at("oe").get<std::size_t>(),
                          b.at("le").get<std::size_t>(), b.at("mr_violations").get<std::size_t>()};
  }
  for (const auto& jc : j.at("cases")) {
    CaseReport c;
    c.case_name = jc.at("case").get<std::string>();
    c.status = jc.at("status").get<std::string>();
    c.operators = jc.at("operators").get<std::vector<std::string>>();
    c.fitness = jc.at("fitness").get<double>();
    c.errors = counts_from_json(jc.at("errors"));
    const auto& mr = jc.at("mr");
    c.mr_checked = mr.at("checked").get<bool>();
    c.mr_violated = mr.at("violated").get<bool>();
    c.mr_ap_reference = mr.at("ap_reference").get<double>();
    c.mr_ap_transformed = mr.at("ap_transformed").get<double>();
    r.cases.push_back(std::move(c));
  }
  return r;
}

}  // namespace

std::string render_markdown(const EvaluationReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "# Evaluation report\n\n";
  out << "Detector: `" << r.detector << "`\n\n";
  out << "| Metric | Value |\n|---|---|\n";
  out << "| AP (R11) | " << r.ap << " |\n";
  out << "| Ground truth | " << r.totals.ground_truth << " |\n";
  out << "| Missed | " << r.totals.missed << " |\n";
  out << "| OE | " << r.totals.oe << " |\n";
  out << "| LE | " << r.totals.le << " |\n";
  out << "| OER | " << std::setprecision(4) << r.totals.oer << " |\n";
  out << "| LER | " << r.totals.ler << std::setprecision(2) << " |\n";
  out << "| MR checked | " << r.mr_checked << " |\n";
  out << "| MR violations | " << r.mr_violations << " |\n\n";
  if (!r.per_operator.empty()) {
    out << "## Per operator\n\n| Operator | Cases | OE | LE | MR violations |\n|---|---|---|---|---|\n";
    for (const auto& [op, b] : r.per_operator) {
      out << "| " << op << " | " << b.cases << " | " << b.oe << " | " << b.le << " | " << b.mr_violations << " |\n";
    }
    out << "\n";
  }
  if (!r.cases.empty()) {
    out << "## Cases\n\n| Case | Status | Operators | Fitness | OE | LE | MR |\n|---|---|---|---|---|---|---|\n";
    for (const auto& c : r.cases) {
      std::string ops;
      for (const auto& o : c.operators) ops += (ops.empty() ? "" : " ") + o;
      out << "| " << c.case_name << " | " << c.status << " | " << ops << " | " << std::setprecision(4) << c.fitness
          << std::setprecision(2) << " | " << c.errors.oe << " | " << c.errors.le << " | "
          << (c.mr_checked ? (c.mr_violated ? "violated" : "ok") : "-") << " |\n";
    }
  }
  return out.str();
}

void emit_report(const EvaluationReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "report.txt");
    out << to_json(report).dump(2) << "\n";
    if (!out) throw Error(Errc::io_failure, "cannot write " + (dir / "report.txt").string());
  }
  std::ofstream md(dir / "report.md");
  md << render_markdown(report);
  if (!md) throw Error(Errc::io_failure, "cannot write " + (dir / "report.md").string());
}

EvaluationReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_file, path.string() + ": " + e.what());
  }
}

}  // namespace coopscene
