#include "reloc/pose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "reloc/errors.hpp"

namespace reloc {

namespace {

constexpr double kDegenerateNorm = 1e-8;
constexpr double kPi = 3.14159265358979323846;

}  // namespace

UnitQuaternion::UnitQuaternion(double w_, double x_, double y_, double z_) {
  const double n = std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_);
  if (!(n >= kDegenerateNorm)) {
    throw DegenerateQuaternion("quaternion norm " + std::to_string(n) +
                               " below 1e-8, cannot normalize");
  }
  const double s = (w_ < 0.0) ? -1.0 / n : 1.0 / n;
  w = w_ * s;
  x = x_ * s;
  y = y_ * s;
  z = z_ * s;
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Eigen::Vector3d& axis,
                                               double angle_rad) {
  const double n = axis.norm();
  if (n < kDegenerateNorm) {
    throw DegenerateQuaternion("axis norm below 1e-8");
  }
  const Eigen::Vector3d u = axis / n;
  const double half = 0.5 * angle_rad;
  const double s = std::sin(half);
  return {std::cos(half), u.x() * s, u.y() * s, u.z() * s};
}

UnitQuaternion UnitQuaternion::from_rotation_matrix(const Eigen::Matrix3d& R) {
  // Shepperd's method: pick the largest of (trace, R00, R11, R22) as pivot.
  const double trace = R(0, 0) + R(1, 1) + R(2, 2);
  double w, x, y, z;
  if (trace > 0.0) {
    const double s = std::sqrt(trace + 1.0) * 2.0;
    w = 0.25 * s;
    x = (R(2, 1) - R(1, 2)) / s;
    y = (R(0, 2) - R(2, 0)) / s;
    z = (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    const double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    w = (R(2, 1) - R(1, 2)) / s;
    x = 0.25 * s;
    y = (R(0, 1) + R(1, 0)) / s;
    z = (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    const double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    w = (R(0, 2) - R(2, 0)) / s;
    x = (R(0, 1) + R(1, 0)) / s;
    y = 0.25 * s;
    z = (R(1, 2) + R(2, 1)) / s;
  } else {
    const double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    w = (R(1, 0) - R(0, 1)) / s;
    x = (R(0, 2) + R(2, 0)) / s;
    y = (R(1, 2) + R(2, 1)) / s;
    z = 0.25 * s;
  }
  return {w, x, y, z};
}

double UnitQuaternion::norm() const {
  return std::sqrt(w * w + x * x + y * y + z * z);
}

UnitQuaternion quat_multiply(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

UnitQuaternion quat_inverse(const UnitQuaternion& q) {
  UnitQuaternion r;
  r.w = q.w;
  r.x = -q.x;
  r.y = -q.y;
  r.z = -q.z;
  return r;
}

double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  // Dot products can drift past 1 by epsilon; clamp before arccos.
  const double d = std::clamp(std::abs(a.dot(b)), 0.0, 1.0);
  return 2.0 * std::acos(d) / kPi;
}

double rotation_error_degrees(const UnitQuaternion& a, const UnitQuaternion& b) {
  // atan2 on the relative quaternion keeps full precision near zero, where
  // arccos of the dot product loses ~1e-8 rad to rounding.
  const UnitQuaternion r = quat_multiply(quat_inverse(a), b);
  const double vec = std::sqrt(r.x * r.x + r.y * r.y + r.z * r.z);
  return 2.0 * std::atan2(vec, std::abs(r.w)) * (180.0 / kPi);
}

Eigen::Matrix3d quat_to_rotation_matrix(const UnitQuaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Eigen::Matrix3d R;
  R << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
       2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
       2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return R;
}

RelativePose relative_pose(const Pose& db, const Pose& query) {
  RelativePose rel;
  rel.dt = query.t - db.t;
  rel.dq = quat_multiply(quat_inverse(db.q), query.q);
  return rel;
}

Pose compose_absolute(const Pose& db, const RelativePose& rel) {
  Pose out;
  out.t = db.t + rel.dt;
  out.q = quat_multiply(db.q, rel.dq);
  return out;
}

std::string pose_to_string(const Pose& pose) {
  std::ostringstream os;
  os.precision(17);
  os << pose.t.x() << ' ' << pose.t.y() << ' ' << pose.t.z() << ' '
     << pose.q.w << ' ' << pose.q.x << ' ' << pose.q.y << ' ' << pose.q.z;
  return os.str();
}

Pose pose_from_string(const std::string& text) {
  std::istringstream is(text);
  double v[7];
  for (double& c : v) {
    if (!(is >> c)) {
      throw ParseError("pose string needs 7 numbers: '" + text + "'");
    }
  }
  std::string rest;
  if (is >> rest) {
    throw ParseError("trailing content after 7 pose numbers: '" + text + "'");
  }
  Pose pose;
  pose.t = {v[0], v[1], v[2]};
  pose.q = UnitQuaternion(v[3], v[4], v[5], v[6]);
  const double n = std::sqrt(v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]);
  if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) {
    // Already unit to double precision (our own serialized output): keep the
    // exact digits instead of renormalizing, so the text form round trips
    // bit for bit. Only the canonical sign flip is applied.
    const double s = v[3] < 0.0 ? -1.0 : 1.0;
    pose.q.w = s * v[3];
    pose.q.x = s * v[4];
    pose.q.y = s * v[5];
    pose.q.z = s * v[6];
  }
  return pose;
}

}  // namespace reloc
