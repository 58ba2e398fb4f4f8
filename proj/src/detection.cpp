#include "coopscene/detection.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "coopscene/error.hpp"
#include "coopscene/fitness.hpp"
#include "coopscene/rng.hpp"
#include "coopscene/scene_io.hpp"

namespace coopscene {

namespace fs = std::filesystem;

DetectionSet ground_truth_detections(const Scene& scene) {
  const std::size_t ego = scene.ego_index();
  DetectionSet out;
  out.detections.reserve(scene.objects.size());
  for (const auto& o : scene.objects) out.detections.push_back({scene.box_in_view(o.box, ego), 1.0});
  return out;
}

// Degraded oracle ----------------------------------------------------------

std::vector<double> DegradedOracleDetector::miss_probabilities(const Scene& scene) const {
  std::vector<double> out;
  for (const auto& t : object_terms(scene, FitnessConfig{})) {
    out.push_back(std::clamp(w_occ_ * t.occ_ego + w_dist_ * t.dis_ego / t.dis_max_ego, 0.0, 1.0));
  }
  return out;
}

DetectionSet DegradedOracleDetector::detect(const Scene& scene) const {
  const std::size_t ego = scene.ego_index();
  const auto p = miss_probabilities(scene);
  DetectionSet out;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    Rng rng = Rng::keyed(seed_, {stable_hash(scene.scene_id), stable_hash(o.object_id)});
    if (rng.uniform() < p[i]) continue;
    out.detections.push_back({scene.box_in_view(o.box, ego), 1 - p[i] / 2});
  }
  return out;
}

std::string DegradedOracleDetector::name() const {
  std::ostringstream out;
  out << "degraded:w_o=" << w_occ_ << ",w_d=" << w_dist_ << ",seed=" << seed_;
  return out.str();
}

// Wire format --------------------------------------------------------------

DetectionSet parse_detections(std::istream& in) {
  DetectionSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto fail = [&](const std::string& why) {
      throw Error(Errc::protocol_violation, "detections line " + std::to_string(line_no) + ": " + why);
    };
    double v[8];
    const char* p = line.data() + first;
    const char* end = line.data() + line.size();
    for (int k = 0; k < 8; ++k) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      const auto [next, ec] = std::from_chars(p, end, v[k]);
      if (ec != std::errc() || next == p) fail("expected 8 numbers (x y z l w h yaw confidence)");
      if (next < end && *next != ' ' && *next != '\t') fail("expected 8 numbers (x y z l w h yaw confidence)");
      p = next;
    }
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    if (p != end) fail("trailing data after 8 numbers");
    for (double x : v) {
      if (!std::isfinite(x)) fail("non-finite value");
    }
    if (v[7] < 0 || v[7] > 1) fail("confidence outside [0, 1]");
    try {
      out.detections.push_back({BBox3D(Vec3(v[0], v[1], v[2]), v[3], v[4], v[5], v[6]), v[7]});
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  return out;
}

DetectionSet read_detections(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::protocol_violation, "cannot read " + path.string());
  return parse_detections(in);
}

void write_detections(const DetectionSet& detections, std::ostream& out) {
  out << std::setprecision(17);
  for (const auto& d : detections.detections) {
    const auto& b = d.box;
    out << b.center().x() << ' ' << b.center().y() << ' ' << b.center().z() << ' ' << b.length() << ' ' << b.width()
        << ' ' << b.height() << ' ' << b.yaw() << ' ' << d.confidence << '\n';
  }
}

DetectionSet RecordedDetector::detect(const Scene& scene) const {
  const fs::path path = dir_ / (scene.scene_id + ".txt");
  if (!fs::exists(path)) throw Error(Errc::protocol_violation, "no recorded detections at " + path.string());
  return read_detections(path);
}

// Subprocess ---------------------------------------------------------------

namespace {

class TempDir {
 public:
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "coopscene-XXXXXX").string();
    if (!mkdtemp(templ.data())) throw Error(Errc::io_failure, "cannot create a temporary directory");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

DetectionSet detect_via_subprocess(const Scene& scene, const std::string& command, std::chrono::milliseconds timeout) {
  TempDir bundle;
  save_scene(scene, bundle.path());
  const std::string script = command + " \"$1\"";
  const std::string bundle_arg = bundle.path().string();

  const pid_t pid = fork();
  if (pid < 0) throw Error(Errc::process_failure, "fork failed");
  if (pid == 0) {
    setpgid(0, 0);
    dup2(STDERR_FILENO, STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", script.c_str(), "sh", bundle_arg.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  auto delay = std::chrono::microseconds(200);
  for (;;) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) throw Error(Errc::process_failure, "waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw Error(Errc::timeout, "detector did not finish within " + std::to_string(timeout.count()) + " ms");
    }
    std::this_thread::sleep_for(delay);
    delay = std::min(delay * 2, std::chrono::microseconds(20000));
  }
  if (WIFSIGNALED(status)) {
    throw Error(Errc::process_failure, "detector killed by signal " + std::to_string(WTERMSIG(status)));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error(Errc::process_failure, "detector exited with status " + std::to_string(WEXITSTATUS(status)));
  }
  const fs::path out = bundle.path() / "detections.txt";
  if (!fs::exists(out)) throw Error(Errc::protocol_violation, "detector wrote no detections.txt");
  return read_detections(out);
}

DetectionSet SubprocessDetector::detect(const Scene& scene) const {
  return detect_via_subprocess(scene, command_, timeout_);
}

// Factory ------------------------------------------------------------------

namespace {

double parse_number(std::string_view text, std::string_view spec) {
  double v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw Error(Errc::invalid_spec, "bad number '" + std::string(text) + "' in detector spec '" + std::string(spec) + "'");
  }
  return v;
}

}  // namespace

std::unique_ptr<Detector> make_detector(std::string_view spec, std::chrono::milliseconds timeout) {
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view() : spec.substr(colon + 1);
  if (kind == "perfect" && arg.empty()) return std::make_unique<PerfectDetector>();
  if (kind == "degraded") {
    double w_o = 0.5, w_d = 0.5;
    std::uint64_t seed = 0;
    std::string_view rest = arg;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) throw Error(Errc::invalid_spec, "expected key=value in '" + std::string(spec) + "'");
      const auto key = item.substr(0, eq);
      const auto value = item.substr(eq + 1);
      if (key == "w_o") {
        w_o = parse_number(value, spec);
      } else if (key == "w_d") {
        w_d = parse_number(value, spec);
      } else if (key == "seed") {
        const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
        if (ec != std::errc() || p != value.data() + value.size()) {
          throw Error(Errc::invalid_spec, "bad seed in '" + std::string(spec) + "'");
        }
      } else {
        throw Error(Errc::invalid_spec, "unknown key '" + std::string(key) + "' in '" + std::string(spec) + "'");
      }
    }
    if (!(w_o >= 0) || !(w_d >= 0)) throw Error(Errc::invalid_spec, "weights must be non-negative");
    return std::make_unique<DegradedOracleDetector>(w_o, w_d, seed);
  }
  if (kind == "recorded" && !arg.empty()) return std::make_unique<RecordedDetector>(fs::path(std::string(arg)));
  if (kind == "subprocess" && !arg.empty()) return std::make_unique<SubprocessDetector>(std::string(arg), timeout);
  throw Error(Errc::invalid_spec, "unknown detector '" + std::string(spec) +
                                      "' (expected perfect, degraded[:w_o=..,w_d=..,seed=..], recorded:<dir>, "
                                      "subprocess:<cmd>)");
}

}  // namespace coopscene
