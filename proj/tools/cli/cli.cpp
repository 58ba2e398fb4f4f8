#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>

#include <CLI11.hpp>

#include "commands.hpp"
#include "coopscene/error.hpp"

namespace coopscene::cli {

namespace {

using nlohmann::json;

struct Flags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out;

  std::optional<double> alpha, beta, gamma, k_longrange, near_field;
  std::optional<std::size_t> gen_num;
  std::optional<int> max_manipulations, max_attempts;
  std::optional<std::string> operators;
  std::optional<double> epsilon;
  std::optional<long long> timeout_ms;
};

void add_common(CLI::App* cmd, Flags& f, bool seeded) {
  cmd->add_option("--config", f.config_file, "JSON config file (flags override it)")->check(CLI::ExistingFile);
  cmd->add_option("--workers", f.workers, "worker threads (default: COOPSCENE_WORKERS, then logical cores)")
      ->check(CLI::NonNegativeNumber);
  if (seeded) cmd->add_option("--seed", f.seed, "master seed (generated and recorded when absent)");
}

void add_fitness(CLI::App* cmd, Flags& f) {
  cmd->add_option("--alpha", f.alpha, "occlusion weight");
  cmd->add_option("--beta", f.beta, "long-range weight");
  cmd->add_option("--gamma", f.gamma, "BEV IoU threshold");
  cmd->add_option("--k-longrange", f.k_longrange, "long-range distance (m)");
  cmd->add_option("--near-field", f.near_field, "objects closer to the ego sensor are ignored (m)");
}

void add_detector(CLI::App* cmd, Flags& f, json& args) {
  cmd->add_option_function<std::string>(
         "--detector", [&args](const std::string& s) { args["detector"] = s; },
         "perfect | degraded[:w_o=,w_d=,seed=] | recorded:<dir> | subprocess:<cmd>")
      ->required();
  cmd->add_option("--timeout-ms", f.timeout_ms, "per-scene timeout of subprocess detectors");
}

RunConfig resolve_config(const Flags& f) {
  RunConfig c = f.config_file.empty() ? RunConfig{} : load_config(f.config_file);
  if (f.alpha) c.fitness.alpha = *f.alpha;
  if (f.beta) c.fitness.beta = *f.beta;
  if (f.gamma) c.fitness.gamma = *f.gamma;
  if (f.k_longrange) c.fitness.k_longrange = *f.k_longrange;
  if (f.near_field) c.fitness.near_field = *f.near_field;
  if (f.gen_num) c.generation.gen_num = *f.gen_num;
  if (f.max_manipulations) c.generation.max_manipulations = *f.max_manipulations;
  if (f.max_attempts) c.generation.max_attempts = *f.max_attempts;
  if (f.operators) {
    c.generation.operators.clear();
    std::string_view rest = *f.operators;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      c.generation.operators.push_back(operator_kind_from_string(rest.substr(0, comma)));
      rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
    }
  }
  if (f.epsilon) c.epsilon = *f.epsilon;
  if (f.timeout_ms) c.detector_timeout_ms = *f.timeout_ms;
  return c;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_spec:
      return kUsageError;
    case Errc::process_failure:
    case Errc::timeout:
    case Errc::protocol_violation:
      return kDetectorFailure;
    default:
      return kDomainError;
  }
}

int replay(const std::string& manifest_file, const std::string& out_override, int workers, std::ostream& out,
           std::ostream& err) {
  std::ifstream in(manifest_file);
  if (!in) throw Error(Errc::io_failure, "cannot open " + manifest_file);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_file, manifest_file + ": " + e.what());
  }
  Invocation inv = invocation_from_json(manifest);
  if (!out_override.empty()) inv.out = out_override;
  if (workers > 0) inv.workers = workers;

  const auto start = std::chrono::steady_clock::now();
  const CommandResult result = execute(inv, out, err);
  write_manifest(inv, result, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());

  const auto expected = manifest.at("outputs").get<std::map<std::string, std::string>>();
  std::size_t mismatches = 0;
  for (const auto& [file, digest] : expected) {
    const auto it = result.outputs.find(file);
    if (it == result.outputs.end()) {
      err << "missing: " << file << "\n";
      ++mismatches;
    } else if (it->second != digest) {
      err << "differs: " << file << "\n";
      ++mismatches;
    }
  }
  for (const auto& [file, digest] : result.outputs) {
    if (!expected.count(file)) {
      err << "unexpected: " << file << "\n";
      ++mismatches;
    }
  }
  if (result.exit_code != manifest.value("exit_code", 0)) {
    err << "exit code " << result.exit_code << " differs from recorded " << manifest.value("exit_code", 0) << "\n";
    ++mismatches;
  }
  if (mismatches) {
    err << "replay differs in " << mismatches << " outputs\n";
    return kDomainError;
  }
  out << "replay identical: " << expected.size() << " outputs\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Multi-view scene transformation and testing of cooperative perception", "coopscene");
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Flags f;
  json a = json::object();
  auto set = [&a](const char* key) { return [&a, key](const auto& v) { a[key] = v; }; };

  auto* validate = app.add_subcommand("validate", "check a scene directory and list every violation");
  validate->add_option_function<std::string>("scene", set("scene"), "scene directory")->required();
  validate->add_option("--out", f.out, "also write diagnostics.txt and a manifest here");
  add_common(validate, f, false);

  auto* transform = app.add_subcommand("transform", "apply one operator to a scene");
  transform->add_option_function<std::string>("scene", set("scene"), "scene directory")->required();
  transform->add_option("--out", f.out, "output bundle directory")->required();
  transform->add_option_function<std::string>("--assets", set("assets"), "directory of .mesh assets");
  add_common(transform, f, true);
  transform->require_subcommand(1);

  auto* op_insert = transform->add_subcommand("insert", "insert an entity (sampled location unless --x/--y)");
  op_insert->add_option_function<std::string>("--asset", set("asset"), "asset id (default: proxy_car)");
  op_insert->add_option_function<double>("--x", set("x"), "world x of the ground point under the box");
  op_insert->add_option_function<double>("--y", set("y"), "world y");
  op_insert->add_option_function<double>("--yaw", set("yaw"), "heading in degrees (default: traffic heading)");
  auto* op_delete = transform->add_subcommand("delete", "delete an object");
  op_delete->add_option_function<std::string>("--target", set("target"), "object id")->required();
  auto* op_scale = transform->add_subcommand("scale", "rescale an object");
  op_scale->add_option_function<std::string>("--target", set("target"), "object id")->required();
  op_scale->add_option_function<double>("--factor", set("factor"), "factor for all axes");
  op_scale->add_option_function<double>("--sx", set("sx"), "length factor");
  op_scale->add_option_function<double>("--sy", set("sy"), "width factor");
  op_scale->add_option_function<double>("--sz", set("sz"), "height factor");
  auto* op_rotate = transform->add_subcommand("rotate", "rotate an object about its center");
  op_rotate->add_option_function<std::string>("--target", set("target"), "object id")->required();
  op_rotate->add_option_function<double>("--deg", set("deg"), "rotation in degrees")->required();
  auto* op_translate = transform->add_subcommand("translate", "move an object on the ground plane");
  op_translate->add_option_function<std::string>("--target", set("target"), "object id")->required();
  op_translate->add_option_function<double>("--tx", set("tx"), "world x offset (m)")->required();
  op_translate->add_option_function<double>("--ty", set("ty"), "world y offset (m)")->required();
  for (auto* op : {op_insert, op_delete, op_scale, op_rotate, op_translate}) {
    op->fallthrough();
    op->final_callback([&a, op] { a["operator"] = op->get_name(); });
  }

  auto* generate = app.add_subcommand("generate", "fitness-guided test case generation");
  generate->add_option_function<std::string>("seeds", set("seeds"), "directory of seed scene directories")
      ->required();
  generate->add_option("--out", f.out, "output directory")->required();
  generate->add_option_function<std::string>("--assets", set("assets"), "directory of .mesh assets for insertion");
  generate->add_option("--gen-num", f.gen_num, "number of test cases kept");
  generate->add_option("--max-manipulations", f.max_manipulations, "operators applied per seed");
  generate->add_option("--max-attempts", f.max_attempts, "operator draws per step before a seed is skipped");
  generate->add_option("--operators", f.operators, "comma-separated operator codes (IS,DL,SC,RO,TR)");
  add_detector(generate, f, a);
  add_fitness(generate, f);
  add_common(generate, f, true);

  auto* evaluate = app.add_subcommand("evaluate", "run a detector over test cases and write a report");
  evaluate->add_option_function<std::string>("cases", set("cases"), "directory of test case bundles")->required();
  evaluate->add_option("--out", f.out, "report directory")->required();
  evaluate->add_option("--epsilon", f.epsilon, "AP tolerance of the metamorphic check");
  add_detector(evaluate, f, a);
  add_fitness(evaluate, f);
  add_common(evaluate, f, false);

  auto* preview = app.add_subcommand("preview", "export a scene as a PLY point file with box wireframes");
  preview->add_option_function<std::string>("scene", set("scene"), "scene directory")->required();
  preview->add_option("--out", f.out, "output .ply file")->required();
  preview->add_flag_function(
      "--per-agent", [&a](std::int64_t n) { a["per_agent"] = n > 0; }, "also write one local-frame file per agent");
  add_common(preview, f, false);

  auto* synth = app.add_subcommand("synth", "write synthetic multi-agent seed scenes");
  synth->add_option("--out", f.out, "output directory")->required();
  synth->add_option_function<std::size_t>("--count", set("count"), "number of scenes (default 10)");
  synth->add_option_function<int>("--agents", set("agents"), "agents per scene, ego included (default 3)");
  synth->add_option_function<int>("--min-cars", set("min_cars"), "fewest labeled cars");
  synth->add_option_function<int>("--max-cars", set("max_cars"), "most labeled cars");
  synth->add_flag_function("--no-buildings", [&a](std::int64_t) { a["buildings"] = false; }, "omit buildings");
  synth->add_flag_function(
      "--no-road-mask", [&a](std::int64_t) { a["road_mask"] = false; }, "omit road masks (plane fit fallback)");
  add_common(synth, f, true);

  std::string manifest_file, replay_out;
  int replay_workers = 0;
  auto* replay_cmd = app.add_subcommand("replay", "rerun a command from its manifest and compare outputs");
  replay_cmd->add_option("manifest", manifest_file, "manifest file")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", replay_out, "output location for the rerun (default: the recorded one)");
  replay_cmd->add_option("--workers", replay_workers, "worker threads")->check(CLI::NonNegativeNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (replay_cmd->parsed()) return replay(manifest_file, replay_out, replay_workers, out, err);

    Invocation inv;
    inv.command = app.get_subcommands().front()->get_name();
    inv.args = a;
    inv.config = resolve_config(f);
    inv.out = f.out;
    inv.workers = f.workers;
    inv.seed_given = f.seed.has_value();
    inv.seed = f.seed ? *f.seed : (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();

    const auto start = std::chrono::steady_clock::now();
    const CommandResult result = execute(inv, out, err);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!inv.out.empty()) write_manifest(inv, result, ms);
    return result.exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  }
}

}  // namespace coopscene::cli
