#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "coopscene/metrics.hpp"

namespace coopscene {

inline constexpr int kReportSchemaVersion = 1;

struct CaseReport {
  std::string case_name;
  std::string status = "ok";  // "ok" or the error text for this case
  std::vector<std::string> operators;  // ops_log codes, in order
  double fitness = 0;
  ErrorCounts errors;
  bool mr_checked = false;
  bool mr_violated = false;
  double mr_ap_reference = 0;
  double mr_ap_transformed = 0;

  bool operator==(const CaseReport&) const = default;
};

struct OperatorBreakdown {
  std::size_t cases = 0;
  std::size_t oe = 0;
  std::size_t le = 0;
  std::size_t mr_violations = 0;

  bool operator==(const OperatorBreakdown&) const = default;
};

struct EvaluationReport {
  int schema_version = kReportSchemaVersion;
  std::string detector;
  double ap = 0;
  ErrorCounts totals;
  std::size_t mr_checked = 0;
  std::size_t mr_violations = 0;
  std::vector<CaseReport> cases;
  std::map<std::string, OperatorBreakdown> per_operator;

  bool operator==(const EvaluationReport&) const = default;
};

bool operator==(const ErrorCounts& a, const ErrorCounts& b);

/// Writes report.txt (JSON, schema versioned) and report.md into `dir`.
/// Throws io_failure.
void emit_report(const EvaluationReport& report, const std::filesystem::path& dir);

/// Parses report.txt. Throws malformed_file.
EvaluationReport read_report(const std::filesystem::path& path);

std::string render_markdown(const EvaluationReport& report);

}  // namespace coopscene
