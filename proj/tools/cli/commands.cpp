#include "commands.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "coopscene/detection.hpp"
#include "coopscene/error.hpp"
#include "coopscene/evaluation.hpp"
#include "coopscene/generation.hpp"
#include "coopscene/mesh.hpp"
#include "coopscene/operators.hpp"
#include "coopscene/parallel.hpp"
#include "coopscene/report.hpp"
#include "coopscene/rng.hpp"
#include "coopscene/scene_io.hpp"
#include "coopscene/synthetic.hpp"

namespace coopscene::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180;

std::string numbered(std::string_view prefix, std::size_t i) {
  std::ostringstream s;
  s << prefix << std::setw(4) << std::setfill('0') << i;
  return s.str();
}

/// Every file under root except manifests, keyed by generic relative path.
std::map<std::string, std::string> digest_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().filename() == kManifestFile) continue;
    out[fs::relative(entry.path(), root).generic_string()] = file_digest(entry.path());
  }
  return out;
}

/// `dir` itself when it holds `marker`, else its subdirectories holding it,
/// sorted by name.
std::vector<fs::path> bundle_dirs(const fs::path& dir, std::string_view marker) {
  if (!fs::is_directory(dir)) throw Error(Errc::io_failure, dir.string() + " is not a directory");
  if (fs::exists(dir / marker)) return {dir};
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / marker)) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<EntityAsset> load_assets(const json& args) {
  std::vector<EntityAsset> out;
  const std::string dir = args.value("assets", "");
  if (dir.empty()) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".mesh") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(load_entity_asset(f));
  if (out.empty()) throw Error(Errc::io_failure, "no .mesh assets in " + dir);
  return out;
}

std::optional<double> opt(const json& args, const char* key) {
  if (!args.contains(key) || args.at(key).is_null()) return std::nullopt;
  return args.at(key).get<double>();
}

std::string required(const json& args, const char* key) {
  if (!args.contains(key) || args.at(key).is_null() || args.at(key).get<std::string>().empty()) {
    throw Error(Errc::invalid_spec, std::string("missing --") + key);
  }
  return args.at(key).get<std::string>();
}

std::unique_ptr<Detector> detector_for(const Invocation& inv) {
  return make_detector(required(inv.args, "detector"), std::chrono::milliseconds(inv.config.detector_timeout_ms));
}

// validate -------------------------------------------------------------------

CommandResult cmd_validate(const Invocation& inv, std::ostream& out, std::ostream& err) {
  CommandResult result;
  const fs::path dir = required(inv.args, "scene");
  const SceneLoadResult loaded = try_load_scene(dir);
  std::ostringstream diag;
  for (const auto& issue : loaded.issues) diag << to_string(issue.code) << ": " << issue.message << "\n";
  if (loaded.issues.empty()) {
    out << dir.string() << ": ok (" << loaded.scene->frames.size() << " frames, " << loaded.scene->objects.size()
        << " objects)\n";
  } else {
    err << diag.str();
    result.exit_code = 1;
  }
  result.summary = {{"valid", loaded.issues.empty()}, {"issues", loaded.issues.size()}};
  if (!inv.out.empty()) {
    fs::create_directories(inv.out);
    std::ofstream(inv.out / "diagnostics.txt") << (loaded.issues.empty() ? "ok\n" : diag.str());
    result.outputs = digest_tree(inv.out);
  }
  return result;
}

// transform ------------------------------------------------------------------

OperatorResult apply_operator(const Scene& scene, const Invocation& inv, Rng& rng, std::uint64_t op_seed) {
  const json& a = inv.args;
  const OperatorConfig& cfg = inv.config.operators;
  const std::string op = required(a, "operator");
  if (op == "insert") {
    EntityAsset asset = make_proxy_car(cfg.proxy_dims);
    const std::string asset_id = a.value("asset", "");
    if (!asset_id.empty() && asset_id != asset.asset_id) {
      const auto assets = load_assets(a);
      const auto it = std::find_if(assets.begin(), assets.end(),
                                   [&](const EntityAsset& e) { return e.asset_id == asset_id; });
      if (it == assets.end()) throw Error(Errc::invalid_spec, "no asset '" + asset_id + "' (use --assets DIR)");
      asset = *it;
    }
    const auto yaw_deg = opt(a, "yaw");
    const double yaw = yaw_deg ? *yaw_deg * kDeg : choose_insertion_yaw(scene, rng);
    const auto x = opt(a, "x"), y = opt(a, "y");
    if (x.has_value() != y.has_value()) throw Error(Errc::invalid_spec, "--x and --y go together");
    std::optional<CandidateLocation> location;
    if (x) {
      const RoadIndex roads(scene, cfg);
      const auto z = roads.ground_height(Vec2(*x, *y));
      if (!z) throw Error(Errc::invalid_location, "no road surface under (" + std::to_string(*x) + ", " +
                                                      std::to_string(*y) + ")");
      location = CandidateLocation{Vec3(*x, *y, *z), yaw, {}};
    } else {
      location = sample_valid_location(scene, asset, yaw, rng, cfg);
      if (!location) throw Error(Errc::invalid_location, "scene has no valid insertion location");
    }
    return insert(scene, asset, *location, op_seed, cfg);
  }
  const std::string target = required(a, "target");
  if (op == "delete") return delete_object(scene, target, cfg, op_seed);
  if (op == "scale") {
    const auto all = opt(a, "factor");
    auto factor = [&](const char* key) {
      if (const auto v = opt(a, key)) return *v;
      if (all) return *all;
      throw Error(Errc::invalid_spec, std::string("scale needs --") + key + " or --factor");
    };
    return scale(scene, target, factor("sx"), factor("sy"), factor("sz"), cfg, op_seed);
  }
  if (op == "rotate") {
    const auto deg = opt(a, "deg");
    if (!deg) throw Error(Errc::invalid_spec, "rotate needs --deg");
    return rotate(scene, target, *deg * kDeg, cfg, op_seed);
  }
  if (op == "translate") {
    const auto tx = opt(a, "tx"), ty = opt(a, "ty");
    if (!tx || !ty) throw Error(Errc::invalid_spec, "translate needs --tx and --ty");
    return translate(scene, target, *tx, *ty, cfg, op_seed);
  }
  throw Error(Errc::invalid_spec, "unknown operator '" + op + "'");
}

CommandResult cmd_transform(const Invocation& inv, std::ostream& out, std::ostream&) {
  const fs::path dir = required(inv.args, "scene");
  const Scene scene = load_scene(dir);
  Rng rng = Rng::keyed(inv.seed, {stable_hash("transform")});
  const std::uint64_t op_seed = rng.next();
  OperatorResult r = apply_operator(scene, inv, rng, op_seed);

  TestCase tc;
  tc.scene = std::move(r.scene);
  tc.ops_log.push_back(r.record);
  tc.seed_scene_id = scene.scene_id;
  tc.seed_source = dir.string();
  save_test_case(tc, inv.out);

  CommandResult result;
  result.outputs = digest_tree(inv.out);
  result.summary = {{"operator", to_json(r.record)}, {"objects", tc.scene.objects.size()}};
  out << to_string(r.record.kind) << " " << r.record.target << " -> " << inv.out.string() << "\n";
  return result;
}

// generate -------------------------------------------------------------------

CommandResult cmd_generate(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const fs::path seeds_dir = required(inv.args, "seeds");
  const auto dirs = bundle_dirs(seeds_dir, kSceneMetaFile);
  if (dirs.empty()) throw Error(Errc::io_failure, "no scene directories under " + seeds_dir.string());
  std::vector<Scene> seeds(dirs.size());
  parallel_for(dirs.size(), resolve_workers(inv.workers), [&](std::size_t i) { seeds[i] = load_scene(dirs[i]); });

  const auto detector = detector_for(inv);
  OperatorContext ops{inv.config.operators, load_assets(inv.args)};
  GenerationConfig gen = inv.config.generation;
  gen.master_seed = inv.seed;
  gen.workers = inv.workers;
  GenerationResult g = generate(seeds, *detector, ops, inv.config.fitness, gen);

  fs::create_directories(inv.out);
  json cases = json::array();
  for (std::size_t rank = 0; rank < g.cases.size(); ++rank) {
    TestCase& tc = g.cases[rank];
    tc.seed_source = dirs[tc.seed_index].string();
    const std::string name = numbered("case_", rank);
    save_test_case(tc, inv.out / name);
    json ops_codes = json::array();
    for (const auto& op : tc.ops_log) ops_codes.push_back(std::string(to_string(op.kind)));
    cases.push_back({{"case", name},
                     {"fitness", tc.fitness},
                     {"f_op", tc.f_op},
                     {"f_lp", tc.f_lp},
                     {"seed_index", tc.seed_index},
                     {"operators", ops_codes}});
  }
  {
    std::ofstream log(inv.out / "generation.log");
    for (const auto& line : g.log) log << line << "\n";
  }
  for (const auto& line : g.log) err << line << "\n";

  CommandResult result;
  result.outputs = digest_tree(inv.out);
  result.summary = {{"seeds", seeds.size()}, {"transformed", g.transformed}, {"cases", cases}};
  out << "generated " << g.cases.size() << " cases from " << seeds.size() << " seeds (" << g.transformed
      << " transformed) -> " << inv.out.string() << "\n";
  return result;
}

// evaluate -------------------------------------------------------------------

CommandResult cmd_evaluate(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const fs::path cases_dir = required(inv.args, "cases");
  const auto dirs = bundle_dirs(cases_dir, kCaseMetaFile);
  if (dirs.empty()) throw Error(Errc::io_failure, "no test case directories under " + cases_dir.string());
  std::vector<CaseInput> inputs(dirs.size());
  parallel_for(dirs.size(), resolve_workers(inv.workers), [&](std::size_t i) {
    inputs[i].name = dirs[i].filename().string();
    inputs[i].test_case = load_test_case(dirs[i]);
    const std::string& src = inputs[i].test_case.seed_source;
    if (!src.empty() && fs::exists(fs::path(src) / kSceneMetaFile)) inputs[i].seed = load_scene(src);
  });

  const auto detector = detector_for(inv);
  EvaluationOptions options{inv.config.fitness, inv.config.epsilon, inv.workers};
  const EvaluationReport report = evaluate_cases(inputs, *detector, options);
  emit_report(report, inv.out);

  CommandResult result;
  std::size_t failed = 0;
  for (const auto& c : report.cases) {
    if (c.status != "ok") {
      ++failed;
      err << c.case_name << ": " << c.status << "\n";
    }
  }
  if (failed) result.exit_code = 3;
  result.outputs = digest_tree(inv.out);
  result.summary = {{"ap", report.ap},
                    {"oe", report.totals.oe},
                    {"le", report.totals.le},
                    {"mr_checked", report.mr_checked},
                    {"mr_violations", report.mr_violations},
                    {"failed_cases", failed}};
  out << std::fixed << std::setprecision(2) << "AP " << report.ap << "  OE " << report.totals.oe << "  LE "
      << report.totals.le << "  MR violations " << report.mr_violations << "/" << report.mr_checked << " -> "
      << inv.out.string() << "\n";
  return result;
}

// preview --------------------------------------------------------------------

constexpr std::array<std::array<int, 3>, 8> kPalette = {{{230, 80, 60},
                                                         {60, 140, 230},
                                                         {90, 200, 90},
                                                         {230, 190, 50},
                                                         {170, 90, 210},
                                                         {60, 200, 200},
                                                         {240, 130, 190},
                                                         {150, 150, 150}}};

constexpr std::array<std::array<int, 2>, 12> kBoxEdges = {
    {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};

void write_ply(const Scene& scene, const std::vector<std::size_t>& frames, bool world, const fs::path& path) {
  std::size_t points = 0;
  for (std::size_t f : frames) points += scene.frames[f].cloud.size();
  const std::size_t boxes = scene.objects.size();
  std::ofstream ply(path);
  if (!ply) throw Error(Errc::io_failure, "cannot write " + path.string());
  ply << "ply\nformat ascii 1.0\n";
  ply << "comment scene " << scene.scene_id << (world ? " world frame" : " agent frame") << "\n";
  for (std::size_t f : frames) {
    ply << "comment agent " << f << " " << scene.frames[f].agent_id << " points " << scene.frames[f].cloud.size()
        << "\n";
  }
  ply << "element vertex " << points + 8 * boxes << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property int agent\n"
      << "element edge " << 12 * boxes << "\n"
      << "property int vertex1\nproperty int vertex2\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  ply << std::setprecision(9);
  for (std::size_t f : frames) {
    const AgentFrame& frame = scene.frames[f];
    const auto& c = kPalette[f % kPalette.size()];
    for (const auto& p : frame.cloud.points) {
      const Vec3 q = world ? transform_point(frame.pose, p.position) : p.position;
      ply << q.x() << " " << q.y() << " " << q.z() << " " << c[0] << " " << c[1] << " " << c[2] << " " << f << "\n";
    }
  }
  const std::size_t view = frames.size() == 1 ? frames[0] : 0;
  for (const auto& o : scene.objects) {
    const BBox3D box = world ? o.box : scene.box_in_view(o.box, view);
    for (const auto& q : box_corners(box)) ply << q.x() << " " << q.y() << " " << q.z() << " 255 255 255 -1\n";
  }
  for (std::size_t b = 0; b < boxes; ++b) {
    const std::size_t base = points + 8 * b;
    for (const auto& e : kBoxEdges) ply << base + e[0] << " " << base + e[1] << " 255 255 0\n";
  }
  if (!ply) throw Error(Errc::io_failure, "cannot write " + path.string());
}

CommandResult cmd_preview(const Invocation& inv, std::ostream& out, std::ostream&) {
  const Scene scene = load_scene(required(inv.args, "scene"));
  if (!inv.out.parent_path().empty()) fs::create_directories(inv.out.parent_path());
  std::vector<std::size_t> all(scene.frames.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CommandResult result;
  write_ply(scene, all, true, inv.out);
  result.outputs[inv.out.filename().string()] = file_digest(inv.out);
  if (inv.args.value("per_agent", false)) {
    for (std::size_t f = 0; f < scene.frames.size(); ++f) {
      const fs::path p = fs::path(inv.out).replace_extension().string() + "." + scene.frames[f].agent_id + ".ply";
      write_ply(scene, {f}, false, p);
      result.outputs[p.filename().string()] = file_digest(p);
    }
  }
  std::size_t points = 0;
  for (const auto& f : scene.frames) points += f.cloud.size();
  result.summary = {{"points", points}, {"boxes", scene.objects.size()}};
  out << "wrote " << points << " points and " << scene.objects.size() << " boxes -> " << inv.out.string() << "\n";
  return result;
}

// synth ----------------------------------------------------------------------

CommandResult cmd_synth(const Invocation& inv, std::ostream& out, std::ostream&) {
  const json& a = inv.args;
  const auto count = a.value("count", std::size_t{10});
  SyntheticOptions base;
  base.agents = a.value("agents", base.agents);
  base.min_cars = a.value("min_cars", base.min_cars);
  base.max_cars = a.value("max_cars", base.max_cars);
  base.buildings = a.value("buildings", base.buildings);
  base.road_mask = a.value("road_mask", base.road_mask);
  base.sensor = inv.config.sensor;
  if (base.agents < 2 || base.agents > 8) throw Error(Errc::invalid_spec, "--agents must be in [2, 8]");
  if (base.min_cars < 0 || base.max_cars < base.min_cars) throw Error(Errc::invalid_spec, "bad car count range");

  fs::create_directories(inv.out);
  parallel_for(count, resolve_workers(inv.workers), [&](std::size_t i) {
    SyntheticOptions o = base;
    o.seed = Rng::keyed(inv.seed, {i}).next();
    Scene scene = make_synthetic_scene(o);
    scene.scene_id = numbered("synth_", i);
    save_scene(scene, inv.out / numbered("scene_", i));
  });
  CommandResult result;
  result.outputs = digest_tree(inv.out);
  result.summary = {{"scenes", count}};
  out << "wrote " << count << " scenes -> " << inv.out.string() << "\n";
  return result;
}

}  // namespace

json to_json(const Invocation& inv) {
  return {{"command", inv.command}, {"args", inv.args},       {"config", to_json(inv.config)},
          {"seed", inv.seed},       {"out", inv.out.string()}, {"workers", inv.workers}};
}

Invocation invocation_from_json(const json& j) {
  Invocation inv;
  try {
    inv.command = j.at("command").get<std::string>();
    inv.args = j.at("args");
    apply_config(inv.config, j.at("config"));
    inv.seed = j.at("seed").get<std::uint64_t>();
    inv.seed_given = true;
    inv.out = j.at("out").get<std::string>();
    inv.workers = j.value("workers", 0);
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_file, std::string("manifest: ") + e.what());
  }
  return inv;
}

CommandResult execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
  if (inv.command == "validate") return cmd_validate(inv, out, err);
  if (inv.command == "transform") return cmd_transform(inv, out, err);
  if (inv.command == "generate") return cmd_generate(inv, out, err);
  if (inv.command == "evaluate") return cmd_evaluate(inv, out, err);
  if (inv.command == "preview") return cmd_preview(inv, out, err);
  if (inv.command == "synth") return cmd_synth(inv, out, err);
  throw Error(Errc::invalid_spec, "unknown command '" + inv.command + "'");
}

fs::path output_root(const Invocation& inv) {
  if (inv.command == "preview") return inv.out.parent_path();
  return inv.out;
}

fs::path manifest_path(const Invocation& inv) {
  if (inv.command == "preview") return fs::path(inv.out.string() + ".manifest.json");
  return inv.out / kManifestFile;
}

void write_manifest(const Invocation& inv, const CommandResult& result, double wall_ms) {
  json j = to_json(inv);
  j["tool"] = "coopscene";
  j["version"] = std::string(kToolVersion);
  j["workers_resolved"] = resolve_workers(inv.workers);
  j["exit_code"] = result.exit_code;
  j["outputs"] = result.outputs;
  j["summary"] = result.summary;
  j["timings"] = {{"wall_ms", wall_ms}};
  const fs::path path = manifest_path(inv);
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  if (!f) throw Error(Errc::io_failure, "cannot write " + path.string());
}

}  // namespace coopscene::cli
