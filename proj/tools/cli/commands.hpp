#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace coopscene::cli {

inline constexpr std::string_view kToolVersion = "0.3.0";
inline constexpr std::string_view kManifestFile = "manifest.json";

/// A fully resolved command: what the manifest records and replay re-runs.
struct Invocation {
  std::string command;  // validate, transform, generate, evaluate, preview, synth
  nlohmann::json args = nlohmann::json::object();  // command-specific inputs and flags
  RunConfig config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::filesystem::path out;  // output directory (or file, for preview)
  int workers = 0;  // 0 -> COOPSCENE_WORKERS -> logical cores
};

nlohmann::json to_json(const Invocation& inv);
Invocation invocation_from_json(const nlohmann::json& j);

struct CommandResult {
  int exit_code = 0;
  /// Output files (relative to the output root) and their content digests.
  std::map<std::string, std::string> outputs;
  /// Command-specific results recorded in the manifest.
  nlohmann::json summary = nlohmann::json::object();
};

/// Runs a resolved invocation, writing diagnostics to `err` and a summary to
/// `out`. Library errors propagate.
CommandResult execute(const Invocation& inv, std::ostream& out, std::ostream& err);

/// Directory the outputs of an invocation are rooted at, and where its
/// manifest goes.
std::filesystem::path output_root(const Invocation& inv);
std::filesystem::path manifest_path(const Invocation& inv);

void write_manifest(const Invocation& inv, const CommandResult& result, double wall_ms);

}  // namespace coopscene::cli
