#pragma once

#include <string>

#include <Eigen/Core>

namespace reloc {

// Rotation as a unit quaternion, w-first Hamilton convention.
//
// Stored quaternions are kept on the canonical hemisphere (w >= 0, sign
// flipped at construction when w < 0) so that serialized output is unique.
// All distance/error operations are invariant under a sign flip of either
// argument, so the convention never changes a represented rotation.
struct UnitQuaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  UnitQuaternion() = default;

  // Normalizes and canonicalizes. Throws DegenerateQuaternion if the raw
  // norm is below 1e-8.
  UnitQuaternion(double w_, double x_, double y_, double z_);

  static UnitQuaternion identity() { return {}; }

  // `axis` need not be normalized; angle in radians.
  static UnitQuaternion from_axis_angle(const Eigen::Vector3d& axis, double angle_rad);

  // Robust extraction (largest-pivot branch). `R` must be a proper rotation.
  static UnitQuaternion from_rotation_matrix(const Eigen::Matrix3d& R);

  double dot(const UnitQuaternion& other) const {
    return w * other.w + x * other.x + y * other.y + z * other.z;
  }

  double norm() const;

  Eigen::Vector4d coeffs_wxyz() const { return {w, x, y, z}; }
};

// Hamilton product a*b, renormalized.
UnitQuaternion quat_multiply(const UnitQuaternion& a, const UnitQuaternion& b);

// For unit quaternions the inverse is the conjugate.
UnitQuaternion quat_inverse(const UnitQuaternion& q);

// Normalized geodesic 2*arccos(|<a,b>|)/pi in [0,1]. Sign-flip invariant.
double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b);

// Rotation angle between a and b in degrees, in [0,180].
double rotation_error_degrees(const UnitQuaternion& a, const UnitQuaternion& b);

Eigen::Matrix3d quat_to_rotation_matrix(const UnitQuaternion& q);

// Absolute camera pose: position in meters (world frame) plus orientation.
// Poses are camera-to-world: X_world = R(q) * X_cam + t.
struct Pose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  UnitQuaternion q;
};

// Transform taking a database pose to a query pose:
//   dt = t_query - t_db,  dq = q_db^-1 * q_query.
struct RelativePose {
  Eigen::Vector3d dt = Eigen::Vector3d::Zero();
  UnitQuaternion dq;
};

RelativePose relative_pose(const Pose& db, const Pose& query);

// Inverse of relative_pose: t = db.t + rel.dt, q = db.q * rel.dq.
Pose compose_absolute(const Pose& db, const RelativePose& rel);

// Canonical text form: "tx ty tz qw qx qy qz", full round-trip precision.
std::string pose_to_string(const Pose& pose);
Pose pose_from_string(const std::string& text);

}  // namespace reloc
