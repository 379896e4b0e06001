#include "reloc/frustum.hpp"

#include <cmath>
#include <string>

#include "reloc/errors.hpp"

namespace reloc {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw DomainError("intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw DomainError("intrinsics: image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw DomainError("intrinsics: principal point outside image bounds");
  }
}

void DepthFrame::validate() const {
  intrinsics.validate();
  if (depth.rows() != intrinsics.height || depth.cols() != intrinsics.width ||
      valid.rows() != intrinsics.height || valid.cols() != intrinsics.width) {
    throw ShapeMismatch("depth frame grid does not match intrinsics size");
  }
  for (Eigen::Index r = 0; r < depth.rows(); ++r) {
    for (Eigen::Index c = 0; c < depth.cols(); ++c) {
      if (valid(r, c) && !(std::isfinite(depth(r, c)) && depth(r, c) > 0.0)) {
        throw DomainError("valid depth at (" + std::to_string(c) + "," +
                          std::to_string(r) + ") is not finite and positive");
      }
    }
  }
}

std::int64_t DepthFrame::valid_count() const {
  return (valid != 0).count();
}

namespace {

// Rigid map camera-a -> camera-b. The rotation is composed in quaternion
// space so that identical poses yield the exact identity map, which is then
// short-circuited per ray: without the fast path the focal-length round trip
// fx * ((u - cx) / fx) can push an edge pixel a few ulps outside the image.
struct CameraToCamera {
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
  bool identity = false;
};

bool same_rotation(const UnitQuaternion& a, const UnitQuaternion& b) {
  // Stored quaternions are canonical (w >= 0); the negated comparison only
  // matters for the w == 0 hemisphere boundary.
  return (a.w == b.w && a.x == b.x && a.y == b.y && a.z == b.z) ||
         (a.w == -b.w && a.x == -b.x && a.y == -b.y && a.z == -b.z);
}

CameraToCamera relative_camera_map(const Pose& pose_a, const Pose& pose_b) {
  CameraToCamera m;
  if (same_rotation(pose_a.q, pose_b.q) && pose_a.t == pose_b.t) {
    m.R = Eigen::Matrix3d::Identity();
    m.t = Eigen::Vector3d::Zero();
    m.identity = true;
    return m;
  }
  m.R = quat_to_rotation_matrix(quat_multiply(quat_inverse(pose_b.q), pose_a.q));
  m.t = quat_to_rotation_matrix(pose_b.q).transpose() * (pose_a.t - pose_b.t);
  return m;
}

// Projects one back-projected ray. The depth scale is divided out before the
// perspective ratio.
inline std::optional<ReprojectedPixel> project_ray(const CameraToCamera& m,
                                                   double u, double v, double d,
                                                   const CameraIntrinsics& K) {
  if (m.identity) {
    return ReprojectedPixel{u, v, d};
  }
  const Eigen::Vector3d dir((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
  const Eigen::Vector3d n = m.R * dir + m.t / d;
  if (!(n.z() > 0.0)) {
    return std::nullopt;
  }
  ReprojectedPixel out;
  out.u = K.fx * (n.x() / n.z()) + K.cx;
  out.v = K.fy * (n.y() / n.z()) + K.cy;
  out.z = d * n.z();
  return out;
}

}  // namespace

std::optional<ReprojectedPixel> reproject_pixel(double u, double v,
                                                double depth_value,
                                                const Pose& pose_a,
                                                const Pose& pose_b,
                                                const CameraIntrinsics& K) {
  if (!(depth_value > 0.0)) {
    throw NonPositiveDepth("depth must be > 0, got " + std::to_string(depth_value));
  }
  return project_ray(relative_camera_map(pose_a, pose_b), u, v, depth_value, K);
}

OverlapCounts frustum_overlap_counts(const DepthFrame& a, const Pose& pose_a,
                                     const Pose& pose_b, int stride) {
  if (stride < 1) {
    throw DomainError("stride must be >= 1");
  }
  const CameraIntrinsics& K = a.intrinsics;
  const CameraToCamera map = relative_camera_map(pose_a, pose_b);

  OverlapCounts counts;
  for (int v = 0; v < K.height; v += stride) {
    for (int u = 0; u < K.width; u += stride) {
      if (!a.valid(v, u)) {
        continue;
      }
      ++counts.evaluated;
      const auto p = project_ray(map, u, v, a.depth(v, u), K);
      if (p && p->u >= 0.0 && p->u < K.width && p->v >= 0.0 && p->v < K.height) {
        ++counts.inside;
      }
    }
  }
  if (counts.evaluated == 0) {
    throw NoValidPixels("frustum overlap: no valid pixels visited");
  }
  return counts;
}

double frustum_overlap(const DepthFrame& a, const Pose& pose_a,
                       const Pose& pose_b, int stride) {
  return frustum_overlap_counts(a, pose_a, pose_b, stride).ratio();
}

FrustumDistances bilateral_frustum_distances(const DepthFrame& a, const Pose& pose_a,
                                             const DepthFrame& b, const Pose& pose_b,
                                             int stride) {
  FrustumDistances d;
  d.d1 = 1.0 - frustum_overlap(a, pose_a, pose_b, stride);
  d.d2 = 1.0 - frustum_overlap(b, pose_b, pose_a, stride);
  return d;
}

}  // namespace reloc
