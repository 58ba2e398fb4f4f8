#include "coopscene/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "coopscene/error.hpp"

namespace coopscene {

std::vector<Triangle> TriangleMesh::triangles(const Transform& t) const {
  std::vector<Triangle> out;
  out.reserve(faces.size());
  for (const auto& f : faces) out.push_back({t * vertices[f[0]], t * vertices[f[1]], t * vertices[f[2]]});
  return out;
}

Vec3 TriangleMesh::min_corner() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  for (const auto& v : vertices) lo = lo.cwiseMin(v);
  return lo;
}

Vec3 TriangleMesh::max_corner() const {
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  for (const auto& v : vertices) hi = hi.cwiseMax(v);
  return hi;
}

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) return false;
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      auto a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  }
  return std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second == 2; });
}

namespace {

void check_faces(const TriangleMesh& mesh) {
  const Vec3 extent = mesh.max_corner() - mesh.min_corner();
  const double scale = std::max(extent.maxCoeff(), 1e-300);
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    for (auto idx : f) {
      if (idx >= mesh.vertices.size()) {
        throw Error(Errc::malformed_file, "face " + std::to_string(i) + " references a missing vertex");
      }
    }
    const double twice_area = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                                  .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
                                  .norm();
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || twice_area <= 1e-12 * scale * scale) {
      throw Error(Errc::degenerate_triangle, "face " + std::to_string(i) + " has zero area");
    }
  }
}

}  // namespace

EntityAsset EntityAsset::from_mesh(std::string asset_id, TriangleMesh mesh) {
  if (mesh.vertices.empty() || mesh.faces.empty()) {
    throw Error(Errc::degenerate_input, "asset '" + asset_id + "' has no triangles");
  }
  check_faces(mesh);
  if (!is_watertight(mesh)) {
    throw Error(Errc::non_watertight_mesh, "asset '" + asset_id + "' has edges not shared by exactly two faces");
  }
  const Vec3 lo = mesh.min_corner();
  const Vec3 hi = mesh.max_corner();
  const Vec3 shift(-(lo.x() + hi.x()) / 2, -(lo.y() + hi.y()) / 2, -lo.z());
  for (auto& v : mesh.vertices) v += shift;

  EntityAsset asset;
  asset.asset_id = std::move(asset_id);
  asset.mesh = std::move(mesh);
  asset.canonical_dims = asset.mesh.max_corner() - asset.mesh.min_corner();
  return asset;
}

EntityAsset EntityAsset::scaled_to(const Vec3& dims) const {
  EntityAsset out = *this;
  const Vec3 factor = dims.cwiseQuotient(canonical_dims);
  for (auto& v : out.mesh.vertices) v = v.cwiseProduct(factor);
  out.canonical_dims = dims;
  return out;
}

BBox3D EntityAsset::placed_box(const Transform& pose) const {
  return BBox3D(pose * Vec3(0, 0, canonical_dims.z() / 2), canonical_dims, pose.yaw());
}

EntityAsset make_proxy_car(const Vec3& dims, std::string asset_id) {
  // Side profile in (x / length, z / height), counter-clockwise, star-shaped
  // around (0, 0.45).
  static const double profile[7][2] = {{-0.5, 0.0}, {0.5, 0.0},   {0.5, 0.5},  {0.2, 0.6},
                                       {0.05, 1.0}, {-0.35, 1.0}, {-0.5, 0.65}};
  constexpr std::uint32_t n = 7;
  TriangleMesh mesh;
  for (int side = 0; side < 2; ++side) {
    const double y = side == 0 ? -dims.y() / 2 : dims.y() / 2;
    for (const auto& p : profile) mesh.vertices.emplace_back(p[0] * dims.x(), y, p[1] * dims.z());
  }
  mesh.vertices.emplace_back(0.0, -dims.y() / 2, 0.45 * dims.z());  // 2n
  mesh.vertices.emplace_back(0.0, dims.y() / 2, 0.45 * dims.z());   // 2n + 1
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    mesh.faces.push_back({2 * n, j, i});
    mesh.faces.push_back({2 * n + 1, n + i, n + j});
    mesh.faces.push_back({i, j, n + j});
    mesh.faces.push_back({i, n + j, n + i});
  }
  return EntityAsset::from_mesh(std::move(asset_id), std::move(mesh));
}

EntityAsset make_box_asset(const Vec3& dims, std::string asset_id) {
  TriangleMesh mesh;
  for (int k = 0; k < 8; ++k) {
    mesh.vertices.emplace_back((k & 1 ? 0.5 : -0.5) * dims.x(), (k & 2 ? 0.5 : -0.5) * dims.y(),
                               (k & 4 ? 1.0 : 0.0) * dims.z());
  }
  const std::uint32_t quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                     {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    mesh.faces.push_back({q[0], q[1], q[2]});
    mesh.faces.push_back({q[0], q[2], q[3]});
  }
  return EntityAsset::from_mesh(std::move(asset_id), std::move(mesh));
}

EntityAsset load_entity_asset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open mesh file " + path.string());
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string tag;
    if (!(tokens >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(tokens >> x >> y >> z) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
        throw Error(Errc::malformed_file, path.string() + ":" + std::to_string(line_no) + ": bad vertex");
      }
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (tokens >> tok) {
        const auto slash = tok.find('/');
        long idx = 0;
        try {
          idx = std::stol(tok.substr(0, slash));
        } catch (const std::exception&) {
          throw Error(Errc::malformed_file, path.string() + ":" + std::to_string(line_no) + ": bad face index");
        }
        if (idx < 0) idx = static_cast<long>(mesh.vertices.size()) + idx + 1;
        if (idx < 1) {
          throw Error(Errc::malformed_file, path.string() + ":" + std::to_string(line_no) + ": bad face index");
        }
        poly.push_back(static_cast<std::uint32_t>(idx - 1));
      }
      if (poly.size() < 3) {
        throw Error(Errc::malformed_file, path.string() + ":" + std::to_string(line_no) + ": face needs 3 indices");
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
    // Other OBJ records (vn, vt, o, g, s, usemtl, ...) carry no geometry we use.
  }
  return EntityAsset::from_mesh(path.stem().string(), std::move(mesh));
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_failure, "cannot write mesh file " + path.string());
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw Error(Errc::io_failure, "failed writing " + path.string());
}

}  // namespace coopscene
