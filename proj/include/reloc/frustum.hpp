#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "reloc/pose.hpp"

namespace reloc {

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws DomainError on non-positive focal lengths / sizes or a principal
  // point outside the image.
  void validate() const;
};

// Posed depth image. depth(v, u) is the camera-frame z coordinate in meters
// of the surface seen at pixel (u, v); valid(v, u) gates holes/sentinels.
struct DepthFrame {
  CameraIntrinsics intrinsics;
  Eigen::MatrixXd depth;                              // height x width
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> valid;

  // Grid dimensions must match the intrinsics and every valid depth must be
  // finite and > 0.
  void validate() const;

  std::int64_t valid_count() const;
};

// Directed frustum distances d = 1 - theta for a->b and b->a.
struct FrustumDistances {
  double d1 = 0.0;
  double d2 = 0.0;
};

struct ReprojectedPixel {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;  // depth in the target camera frame
};

// Back-projects pixel (u, v) of camera a at the given depth, maps it through
// world coordinates into camera b, and projects with K. Both cameras share
// the intrinsics K (single calibrated camera). Poses are camera-to-world.
// Returns nullopt when the point lands behind camera b (z' <= 0).
// Throws NonPositiveDepth when depth_value <= 0.
std::optional<ReprojectedPixel> reproject_pixel(double u, double v,
                                                double depth_value,
                                                const Pose& pose_a,
                                                const Pose& pose_b,
                                                const CameraIntrinsics& K);

struct OverlapCounts {
  std::int64_t inside = 0;
  std::int64_t evaluated = 0;

  double ratio() const {
    return evaluated > 0 ? static_cast<double>(inside) / static_cast<double>(evaluated) : 0.0;
  }
};

// Counts valid pixels of `a` (visited on a stride x stride grid) whose
// reprojection into camera b lands in [0,width) x [0,height) with positive
// depth. Pixel coordinates are taken as-is from the integer grid.
// Throws NoValidPixels when no valid pixel is visited.
OverlapCounts frustum_overlap_counts(const DepthFrame& a, const Pose& pose_a,
                                     const Pose& pose_b, int stride = 1);

// Overlap fraction theta in [0,1].
double frustum_overlap(const DepthFrame& a, const Pose& pose_a,
                       const Pose& pose_b, int stride = 1);

// d1 = 1 - theta(a->b), d2 = 1 - theta(b->a).
FrustumDistances bilateral_frustum_distances(const DepthFrame& a, const Pose& pose_a,
                                             const DepthFrame& b, const Pose& pose_b,
                                             int stride = 1);

}  // namespace reloc
