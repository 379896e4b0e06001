#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "reloc/frustum.hpp"
#include "reloc/pose.hpp"

namespace reloc {

// --- pose / depth file formats -------------------------------------------

// Reads 16 whitespace-separated floats as a row-major 4x4 camera-to-world
// homogeneous matrix. The rotation block must satisfy |R^T R - I| <= 1e-3
// (it is re-orthonormalized through unit-quaternion projection); worse than
// that throws NonOrthonormalRotation. Malformed numbers or a bottom row far
// from (0 0 0 1) throw ParseError.
Pose load_pose_file(const std::filesystem::path& path);

void save_pose_file(const std::filesystem::path& path, const Pose& pose);

// Reads a 16-bit single-channel PNG as metric depth: value * scale, with 0
// and 65535 marked invalid. The image size must match the intrinsics.
// Throws UnsupportedFormat for anything but 16-bit grayscale PNG.
DepthFrame load_depth_png(const std::filesystem::path& path,
                          const CameraIntrinsics& intrinsics,
                          double scale = 0.001);

// Writes depth / scale rounded to the nearest integer value; invalid pixels
// and values outside [1, 65534] are written as 0.
void save_depth_png(const std::filesystem::path& path, const DepthFrame& frame,
                    double scale = 0.001);

// --- scene manifest --------------------------------------------------------

struct SequenceInfo {
  std::string name;   // e.g. "seq-01"
  std::string split;  // "train" or "test"
  int frame_count = 0;
};

// Encoder inputs are a deterministic function of pose, recomputed at load
// time from these parameters instead of being stored per frame.
struct FeatureModelParams {
  int dim = 64;
  std::uint64_t seed = 1;
  double pose_scale = 0.5;   // applied to translation before embedding
  double freq_scale = 2.0;   // random-feature frequency range
  // Per-frame perturbation amplitude. Kept well below the pose signal so a
  // trained head can regress millimeter-scale relative poses through it.
  double noise = 0.001;
};

struct SceneManifest {
  std::string scene_name;
  CameraIntrinsics intrinsics;
  double depth_scale = 0.001;
  FeatureModelParams feature;
  std::vector<SequenceInfo> sequences;
};

SceneManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const SceneManifest& manifest);

// --- feature model ---------------------------------------------------------

// Smooth injective-in-practice map from pose to the encoder input vector:
// components 0..6 hold (pose_scale * t, q), the rest are sinusoids of random
// linear projections of that 7-vector, and every component gets a small
// per-frame perturbation seeded from the frame id.
class FeatureModel {
 public:
  explicit FeatureModel(const FeatureModelParams& params);

  Eigen::VectorXd features(const Pose& pose, std::string_view frame_id) const;

  const FeatureModelParams& params() const { return params_; }

 private:
  FeatureModelParams params_;
  Eigen::MatrixXd omega_;  // (dim-7) x 7
  Eigen::VectorXd phase_;  // dim-7
};

// --- scenes ----------------------------------------------------------------

struct Frame {
  std::string id;  // "<sequence>/frame-XXXXXX"
  Pose pose;       // camera-to-world
  DepthFrame depth;
  Eigen::VectorXd features;
  bool is_query = false;  // true for test-split frames
};

struct Scene {
  SceneManifest manifest;
  std::vector<Frame> frames;

  const Frame& frame(std::string_view id) const;  // throws DomainError if absent
  std::vector<const Frame*> database_frames() const;
  std::vector<const Frame*> query_frames() const;
};

// Loads every frame referenced by <root>/manifest.txt. Missing files throw
// IoError; duplicate sequence names throw DuplicateId.
Scene load_scene(const std::filesystem::path& root);

// Writes manifest.txt plus per-frame pose and depth files under root.
// Depth was quantized at generation, so a load after export reproduces the
// generated scene bit-exactly except for < 1e-12 pose text round-off.
void export_scene(const Scene& scene, const std::filesystem::path& root);

// --- synthetic generation --------------------------------------------------

enum class SceneLayout {
  kBox,    // positions sampled in the workspace box, view toward the plane
  kOrbit,  // ring of cameras with rolling orientation and swinging targets
};

// Cameras observe a world plane z = plane_distance; depth is the analytic
// camera-frame z of the plane hit, quantized to the depth scale. The orbit
// layout sweeps view direction and roll so that mined pairs cover the full
// difficulty range.
struct SyntheticSceneConfig {
  std::string name = "orbit-desk";
  std::uint64_t seed = 1;
  int database_frames = 48;
  int query_frames = 12;
  SceneLayout layout = SceneLayout::kOrbit;
  Eigen::Vector3d workspace_extent{1.6, 1.2, 0.8};  // full widths, meters
  double plane_distance = 2.5;
  double depth_noise = 0.0;  // uniform +-noise in meters before quantization
  double orbit_radius = 0.3;
  double orbit_target_swing = 1.1;  // lateral amplitude of the look-at point
  // Handheld-style wobble applied to every orbit pose (database and query),
  // so frames explore all six degrees of freedom around the nominal ring the
  // way a real mapping or test sequence would: per-axis uniform
  // +-trajectory_jitter_t meters plus a rotation by a uniform angle in
  // [0, trajectory_jitter_r_deg] about a random axis.
  double trajectory_jitter_t = 0.0;
  double trajectory_jitter_r_deg = 0.0;
  CameraIntrinsics intrinsics{60.0, 60.0, 31.5, 23.5, 64, 48};
  double depth_scale = 0.001;
  FeatureModelParams feature;

  // Throws DomainError: extents, plane distance, frame counts and orbit
  // geometry must be positive.
  void validate() const;
};

// Deterministic per config; every produced DepthFrame is valid for the
// frustum routines. Database frames go to seq-01 (train split), query
// frames to seq-02 (test split).
Scene generate_synthetic_scene(const SyntheticSceneConfig& config);

// Analytic depth of the world plane z = config.plane_distance as seen from
// `pose`: each pixel stores the camera-frame z of the ray/plane hit,
// quantized to the depth scale; rays missing the plane are invalid.
DepthFrame render_plane_depth(const SyntheticSceneConfig& config, const Pose& pose,
                              std::uint64_t noise_seed);

// Camera-to-world rotation looking from `position` toward `target` (camera
// +z axis), rolled about the view axis.
UnitQuaternion look_at_rotation(const Eigen::Vector3d& position,
                                const Eigen::Vector3d& target, double roll);

}  // namespace reloc
