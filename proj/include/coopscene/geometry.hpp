#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "coopscene/error.hpp"

namespace coopscene {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar normalize_yaw(Scalar yaw) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar y = std::remainder(yaw, Scalar(2) * pi);
  if (y <= -pi) y += Scalar(2) * pi;
  return y;
}

template <typename Scalar>
bool all_finite(const Vector3<Scalar>& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Proper rigid motion x -> R x + t. The rotation is checked to be orthonormal
/// with determinant +1 on construction.
template <typename Scalar>
class RigidTransform {
 public:
  using Rotation = Matrix3<Scalar>;
  using Translation = Vector3<Scalar>;

  RigidTransform() : rotation_(Rotation::Identity()), translation_(Translation::Zero()) {}

  RigidTransform(const Rotation& rotation, const Translation& translation)
      : rotation_(rotation), translation_(translation) {
    const Scalar orth_err = (rotation_.transpose() * rotation_ - Rotation::Identity()).cwiseAbs().maxCoeff();
    const Scalar det_err = std::abs(rotation_.determinant() - Scalar(1));
    if (!(orth_err <= Scalar(1e-6)) || !(det_err <= Scalar(1e-6)) || !rotation_.allFinite() ||
        !translation_.allFinite()) {
      std::ostringstream msg;
      msg << "rotation is not a proper orthonormal matrix (orthogonality error " << orth_err
          << ", determinant error " << det_err << ")";
      throw Error(Errc::invariant_violation, msg.str());
    }
  }

  static RigidTransform Identity() { return RigidTransform(); }

  static RigidTransform Translate(const Translation& t) { return RigidTransform(Rotation::Identity(), t); }

  /// Rotation by `yaw` about +z followed by translation.
  static RigidTransform FromYaw(Scalar yaw, const Translation& t = Translation::Zero()) {
    return RigidTransform(Eigen::AngleAxis<Scalar>(yaw, Translation::UnitZ()).toRotationMatrix(), t);
  }

  /// From a 3x4 [R | t] matrix, the on-disk pose layout.
  static RigidTransform FromMatrix(const Eigen::Matrix<Scalar, 3, 4>& m) {
    return RigidTransform(m.template leftCols<3>(), m.col(3));
  }

  Eigen::Matrix<Scalar, 3, 4> matrix() const {
    Eigen::Matrix<Scalar, 3, 4> m;
    m << rotation_, translation_;
    return m;
  }

  const Rotation& rotation() const { return rotation_; }
  const Translation& translation() const { return translation_; }

  /// Heading of the rotated +x axis projected onto the ground plane.
  Scalar yaw() const { return std::atan2(rotation_(1, 0), rotation_(0, 0)); }

  Translation operator*(const Translation& p) const { return rotation_ * p + translation_; }

  /// Composition: (a * b)(p) == a(b(p)).
  RigidTransform operator*(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation_ = rotation_ * other.rotation_;
    out.translation_ = rotation_ * other.translation_ + translation_;
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(out.rotation_ * translation_);
    return out;
  }

  bool isApprox(const RigidTransform& other, Scalar tol) const {
    return (rotation_ - other.rotation_).cwiseAbs().maxCoeff() <= tol &&
           (translation_ - other.translation_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  Rotation rotation_;
  Translation translation_;
};

using Transform = RigidTransform<double>;

template <typename Scalar>
Vector3<Scalar> transform_point(const RigidTransform<Scalar>& t, const Vector3<Scalar>& p) {
  return t * p;
}

template <typename Scalar>
RigidTransform<Scalar> invert(const RigidTransform<Scalar>& t) {
  return t.inverse();
}

template <typename Scalar>
RigidTransform<Scalar> compose(const RigidTransform<Scalar>& a, const RigidTransform<Scalar>& b) {
  return a * b;
}

/// Upright oriented box: center, extents along its local x (length), y (width)
/// and z (height), heading about +z. Dimensions are strictly positive and the
/// yaw is kept in (-pi, pi].
template <typename Scalar>
class Box3 {
 public:
  Box3(const Vector3<Scalar>& center, Scalar length, Scalar width, Scalar height, Scalar yaw)
      : center_(center), dims_(length, width, height), yaw_(normalize_yaw(yaw)) {
    if (!(length > 0) || !(width > 0) || !(height > 0) || !all_finite(center) || !std::isfinite(yaw)) {
      std::ostringstream msg;
      msg << "box dimensions must be positive and finite (got " << length << " x " << width << " x " << height
          << ")";
      throw Error(Errc::invariant_violation, msg.str());
    }
  }

  Box3(const Vector3<Scalar>& center, const Vector3<Scalar>& dims, Scalar yaw)
      : Box3(center, dims.x(), dims.y(), dims.z(), yaw) {}

  const Vector3<Scalar>& center() const { return center_; }
  const Vector3<Scalar>& dims() const { return dims_; }
  Scalar length() const { return dims_.x(); }
  Scalar width() const { return dims_.y(); }
  Scalar height() const { return dims_.z(); }
  Scalar yaw() const { return yaw_; }

  /// Center of the bottom face.
  Vector3<Scalar> base() const { return center_ - Vector3<Scalar>(0, 0, dims_.z() / 2); }

  /// Box-local -> host frame.
  RigidTransform<Scalar> pose() const { return RigidTransform<Scalar>::FromYaw(yaw_, center_); }

  bool operator==(const Box3& other) const {
    return center_ == other.center_ && dims_ == other.dims_ && yaw_ == other.yaw_;
  }

 private:
  Vector3<Scalar> center_;
  Vector3<Scalar> dims_;
  Scalar yaw_;
};

using BBox3D = Box3<double>;

/// Box expressed in another frame. Exact for transforms whose rotation is a
/// pure yaw; otherwise the heading of the rotated box is used.
template <typename Scalar>
Box3<Scalar> transform_box(const RigidTransform<Scalar>& t, const Box3<Scalar>& b) {
  return Box3<Scalar>(t * b.center(), b.dims(), b.yaw() + t.yaw());
}

/// Corner order: indices 0-3 on the bottom face, 4-7 on the top face; within
/// a face the box-local (x, y) signs run (+,+), (-,+), (-,-), (+,-), which is
/// counter-clockwise seen from above. Corner i+4 sits directly over corner i.
template <typename Scalar>
std::array<Vector3<Scalar>, 8> box_corners(const Box3<Scalar>& b) {
  static constexpr int sx[4] = {1, -1, -1, 1};
  static constexpr int sy[4] = {1, 1, -1, -1};
  const Scalar c = std::cos(b.yaw());
  const Scalar s = std::sin(b.yaw());
  std::array<Vector3<Scalar>, 8> out;
  for (int level = 0; level < 2; ++level) {
    const Scalar dz = (level == 0 ? -b.height() : b.height()) / 2;
    for (int i = 0; i < 4; ++i) {
      const Scalar dx = sx[i] * b.length() / 2;
      const Scalar dy = sy[i] * b.width() / 2;
      out[level * 4 + i] = b.center() + Vector3<Scalar>(c * dx - s * dy, s * dx + c * dy, dz);
    }
  }
  return out;
}

/// Bird's-eye-view footprint, counter-clockwise.
template <typename Scalar>
std::array<Vector2<Scalar>, 4> bev_corners(const Box3<Scalar>& b) {
  const auto corners = box_corners(b);
  return {corners[0].template head<2>(), corners[1].template head<2>(), corners[2].template head<2>(),
          corners[3].template head<2>()};
}

/// Boundary-inclusive containment test in the box's host frame.
template <typename Scalar>
bool point_in_box(const Vector3<Scalar>& p, const Box3<Scalar>& b) {
  const Vector3<Scalar> d = p - b.center();
  const Scalar c = std::cos(b.yaw());
  const Scalar s = std::sin(b.yaw());
  const Scalar lx = c * d.x() + s * d.y();
  const Scalar ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= b.length() / 2 && std::abs(ly) <= b.width() / 2 && std::abs(d.z()) <= b.height() / 2;
}

template <typename Scalar>
bool point_in_footprint(const Vector2<Scalar>& p, const Box3<Scalar>& b) {
  const Vector2<Scalar> d = p - b.center().template head<2>();
  const Scalar c = std::cos(b.yaw());
  const Scalar s = std::sin(b.yaw());
  return std::abs(c * d.x() + s * d.y()) <= b.length() / 2 && std::abs(-s * d.x() + c * d.y()) <= b.width() / 2;
}

namespace detail {

template <typename Scalar>
Scalar cross2(const Vector2<Scalar>& a, const Vector2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

template <typename Scalar>
Scalar polygon_area(const std::vector<Vector2<Scalar>>& poly) {
  Scalar twice = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) twice += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return twice / 2;
}

// Sutherland-Hodgman: clips `subject` against the counter-clockwise convex
// polygon `clip`.
template <typename Scalar, std::size_t N>
std::vector<Vector2<Scalar>> clip_convex(std::vector<Vector2<Scalar>> subject,
                                         const std::array<Vector2<Scalar>, N>& clip) {
  std::vector<Vector2<Scalar>> next;
  for (std::size_t e = 0; e < N && !subject.empty(); ++e) {
    const Vector2<Scalar>& a = clip[e];
    const Vector2<Scalar> edge = clip[(e + 1) % N] - a;
    next.clear();
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vector2<Scalar>& p = subject[i];
      const Vector2<Scalar>& q = subject[(i + 1) % subject.size()];
      const Scalar sp = cross2(edge, Vector2<Scalar>(p - a));
      const Scalar sq = cross2(edge, Vector2<Scalar>(q - a));
      if (sp >= 0) next.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const Scalar t = sp / (sp - sq);
        next.push_back(p + t * (q - p));
      }
    }
    subject.swap(next);
  }
  return subject;
}

template <typename Scalar>
bool lexicographically_less(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  const std::array<Scalar, 6> ka{a.center().x(), a.center().y(), a.length(), a.width(), a.yaw(), a.center().z()};
  const std::array<Scalar, 6> kb{b.center().x(), b.center().y(), b.length(), b.width(), b.yaw(), b.center().z()};
  return ka < kb;
}

}  // namespace detail

/// Area of the intersection of the two BEV footprints.
template <typename Scalar>
Scalar bev_intersection_area(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  const Scalar reach = (Vector2<Scalar>(a.length(), a.width()).norm() + Vector2<Scalar>(b.length(), b.width()).norm()) / 2;
  if ((a.center().template head<2>() - b.center().template head<2>()).norm() > reach) return 0;
  const auto pa = bev_corners(a);
  const auto pb = bev_corners(b);
  const auto inter = detail::clip_convex(std::vector<Vector2<Scalar>>(pa.begin(), pa.end()), pb);
  if (inter.size() < 3) return 0;
  return std::max<Scalar>(0, detail::polygon_area(inter));
}

/// Intersection over union of the yaw-rotated footprints; z is ignored.
/// Arguments are put in a canonical order first so iou_bev(a, b) and
/// iou_bev(b, a) are bitwise equal.
template <typename Scalar>
Scalar iou_bev(const Box3<Scalar>& a, const Box3<Scalar>& b) {
  if (detail::lexicographically_less(b, a)) return iou_bev(b, a);
  const Scalar inter = bev_intersection_area(a, b);
  if (inter <= 0) return 0;
  const Scalar uni = a.length() * a.width() + b.length() * b.width() - inter;
  if (uni <= 0) return 0;
  return std::clamp<Scalar>(inter / uni, 0, 1);
}

}  // namespace coopscene
