#include "reloc/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Geometry>
#include <png.h>

#include "reloc/errors.hpp"
#include "reloc/rng.hpp"

namespace reloc {

namespace {

constexpr std::uint64_t kDepthNoiseSalt = 0xD3F7A9C15B11D0E7ULL;
constexpr std::uint64_t kFeatureNoiseSalt = 0x8FA1C53EB72D964FULL;

std::string format_frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame-%06d", index);
  return buf;
}

struct FileGuard {
  FILE* fp = nullptr;
  ~FileGuard() {
    if (fp) std::fclose(fp);
  }
};

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteGuard() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

}  // namespace

// --- pose files --------------------------------------------------------------

Pose load_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open pose file " + path.string());
  }
  Eigen::Matrix4d M;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!(in >> M(r, c))) {
        throw ParseError("pose file " + path.string() + ": expected 16 floats");
      }
    }
  }
  std::string trailing;
  if (in >> trailing) {
    throw ParseError("pose file " + path.string() + ": trailing data '" + trailing + "'");
  }
  for (int c = 0; c < 3; ++c) {
    if (std::abs(M(3, c)) > 1e-6) {
      throw ParseError("pose file " + path.string() + ": bottom row is not (0 0 0 1)");
    }
  }
  if (std::abs(M(3, 3) - 1.0) > 1e-6) {
    throw ParseError("pose file " + path.string() + ": bottom row is not (0 0 0 1)");
  }

  const Eigen::Matrix3d R = M.topLeftCorner<3, 3>();
  const double ortho_err = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-3 || R.determinant() < 0.0) {
    std::ostringstream msg;
    msg << "pose file " << path.string() << ": rotation block is not orthonormal (|R^T R - I| = "
        << ortho_err << ", det = " << R.determinant() << ")";
    throw NonOrthonormalRotation(msg.str());
  }
  Pose pose;
  pose.t = M.topRightCorner<3, 1>();
  pose.q = UnitQuaternion::from_rotation_matrix(R);  // re-orthonormalizes
  return pose;
}

void save_pose_file(const std::filesystem::path& path, const Pose& pose) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write pose file " + path.string());
  }
  out << std::setprecision(17);
  const Eigen::Matrix3d R = quat_to_rotation_matrix(pose.q);
  for (int r = 0; r < 3; ++r) {
    out << R(r, 0) << ' ' << R(r, 1) << ' ' << R(r, 2) << ' ' << pose.t(r) << '\n';
  }
  out << "0 0 0 1\n";
  if (!out) {
    throw IoError("failed writing pose file " + path.string());
  }
}

// --- depth PNGs --------------------------------------------------------------

DepthFrame load_depth_png(const std::filesystem::path& path,
                          const CameraIntrinsics& intrinsics, double scale) {
  if (!(scale > 0.0)) {
    throw DomainError("depth scale must be > 0");
  }
  FileGuard file;
  file.fp = std::fopen(path.string().c_str(), "rb");
  if (!file.fp) {
    throw IoError("cannot open depth file " + path.string());
  }
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw UnsupportedFormat("not a PNG file: " + path.string());
  }

  PngReadGuard guard;
  guard.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!guard.png) {
    throw IoError("png_create_read_struct failed");
  }
  guard.info = png_create_info_struct(guard.png);
  if (!guard.info) {
    throw IoError("png_create_info_struct failed");
  }

  std::vector<unsigned char> data;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(guard.png))) {
    throw UnsupportedFormat("corrupt PNG file: " + path.string());
  }
  png_init_io(guard.png, file.fp);
  png_set_sig_bytes(guard.png, 8);
  png_read_info(guard.png, guard.info);

  const png_uint_32 width = png_get_image_width(guard.png, guard.info);
  const png_uint_32 height = png_get_image_height(guard.png, guard.info);
  const int bit_depth = png_get_bit_depth(guard.png, guard.info);
  const int color_type = png_get_color_type(guard.png, guard.info);
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 16) {
    throw UnsupportedFormat("depth file " + path.string() +
                            " is not 16-bit grayscale PNG");
  }
  if (static_cast<int>(width) != intrinsics.width ||
      static_cast<int>(height) != intrinsics.height) {
    std::ostringstream msg;
    msg << "depth file " << path.string() << " is " << width << "x" << height
        << ", intrinsics expect " << intrinsics.width << "x" << intrinsics.height;
    throw ShapeMismatch(msg.str());
  }

  const std::size_t row_bytes = static_cast<std::size_t>(width) * 2;
  data.resize(row_bytes * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) {
    rows[r] = data.data() + r * row_bytes;
  }
  png_read_image(guard.png, rows.data());
  png_read_end(guard.png, nullptr);

  DepthFrame frame;
  frame.intrinsics = intrinsics;
  frame.depth.setZero(intrinsics.height, intrinsics.width);
  frame.valid.setZero(intrinsics.height, intrinsics.width);
  for (int v = 0; v < intrinsics.height; ++v) {
    const unsigned char* row = rows[v];
    for (int u = 0; u < intrinsics.width; ++u) {
      const unsigned value = (unsigned(row[2 * u]) << 8) | unsigned(row[2 * u + 1]);
      if (value == 0 || value == 65535) {
        continue;  // sentinel / hole
      }
      frame.depth(v, u) = static_cast<double>(value) * scale;
      frame.valid(v, u) = 1;
    }
  }
  return frame;
}

void save_depth_png(const std::filesystem::path& path, const DepthFrame& frame,
                    double scale) {
  if (!(scale > 0.0)) {
    throw DomainError("depth scale must be > 0");
  }
  const int width = frame.intrinsics.width;
  const int height = frame.intrinsics.height;
  if (frame.depth.rows() != height || frame.depth.cols() != width ||
      frame.valid.rows() != height || frame.valid.cols() != width) {
    throw ShapeMismatch("depth frame grid does not match intrinsics size");
  }

  const std::size_t row_bytes = static_cast<std::size_t>(width) * 2;
  std::vector<unsigned char> data(row_bytes * static_cast<std::size_t>(height), 0);
  std::vector<png_bytep> rows(height);
  for (int v = 0; v < height; ++v) {
    rows[v] = data.data() + static_cast<std::size_t>(v) * row_bytes;
    for (int u = 0; u < width; ++u) {
      if (!frame.valid(v, u)) {
        continue;
      }
      const long long q = std::llround(frame.depth(v, u) / scale);
      if (q < 1 || q > 65534) {
        continue;  // out of range, store as invalid
      }
      rows[v][2 * u] = static_cast<unsigned char>((q >> 8) & 0xFF);
      rows[v][2 * u + 1] = static_cast<unsigned char>(q & 0xFF);
    }
  }

  FileGuard file;
  file.fp = std::fopen(path.string().c_str(), "wb");
  if (!file.fp) {
    throw IoError("cannot write depth file " + path.string());
  }
  PngWriteGuard guard;
  guard.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!guard.png) {
    throw IoError("png_create_write_struct failed");
  }
  guard.info = png_create_info_struct(guard.png);
  if (!guard.info) {
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(guard.png))) {
    throw IoError("failed writing depth file " + path.string());
  }
  png_init_io(guard.png, file.fp);
  png_set_IHDR(guard.png, guard.info, width, height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
  png_write_info(guard.png, guard.info);
  png_write_image(guard.png, rows.data());
  png_write_end(guard.png, nullptr);
}

// --- manifest ----------------------------------------------------------------

SceneManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open manifest " + path.string());
  }
  SceneManifest m;
  bool saw_scene = false;
  bool saw_intrinsics = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream iss(line);
    std::string key;
    if (!(iss >> key) || key[0] == '#') {
      continue;
    }
    const auto fail = [&](const std::string& what) -> ParseError {
      std::ostringstream msg;
      msg << "manifest " << path.string() << " line " << line_no << ": " << what;
      return ParseError(msg.str());
    };
    if (key == "scene") {
      std::string rest;
      std::getline(iss, rest);
      const auto begin = rest.find_first_not_of(" \t");
      const auto end = rest.find_last_not_of(" \t\r");
      if (begin == std::string::npos) {
        throw fail("empty scene name");
      }
      m.scene_name = rest.substr(begin, end - begin + 1);
      saw_scene = true;
    } else if (key == "intrinsics") {
      if (!(iss >> m.intrinsics.fx >> m.intrinsics.fy >> m.intrinsics.cx >>
            m.intrinsics.cy >> m.intrinsics.width >> m.intrinsics.height)) {
        throw fail("expected fx fy cx cy width height");
      }
      saw_intrinsics = true;
    } else if (key == "depth_scale") {
      if (!(iss >> m.depth_scale)) throw fail("expected depth scale value");
    } else if (key == "feature_dim") {
      if (!(iss >> m.feature.dim)) throw fail("expected feature dim");
    } else if (key == "feature_seed") {
      if (!(iss >> m.feature.seed)) throw fail("expected feature seed");
    } else if (key == "feature_pose_scale") {
      if (!(iss >> m.feature.pose_scale)) throw fail("expected pose scale");
    } else if (key == "feature_freq_scale") {
      if (!(iss >> m.feature.freq_scale)) throw fail("expected frequency scale");
    } else if (key == "feature_noise") {
      if (!(iss >> m.feature.noise)) throw fail("expected noise amplitude");
    } else if (key == "sequence") {
      SequenceInfo seq;
      if (!(iss >> seq.name >> seq.split >> seq.frame_count)) {
        throw fail("expected sequence <name> <split> <count>");
      }
      if (seq.split != "train" && seq.split != "test") {
        throw fail("unknown split '" + seq.split + "'");
      }
      if (seq.frame_count < 0) {
        throw fail("negative frame count");
      }
      for (const auto& other : m.sequences) {
        if (other.name == seq.name) {
          throw DuplicateId("manifest " + path.string() + ": duplicate sequence " + seq.name);
        }
      }
      m.sequences.push_back(std::move(seq));
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }
  if (!saw_scene || !saw_intrinsics || m.sequences.empty()) {
    throw ParseError("manifest " + path.string() +
                     " must declare scene, intrinsics and at least one sequence");
  }
  m.intrinsics.validate();
  if (m.feature.dim < 7) {
    throw ParseError("manifest " + path.string() + ": feature_dim must be >= 7");
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const SceneManifest& manifest) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write manifest " + path.string());
  }
  out << std::setprecision(17);
  out << "scene " << manifest.scene_name << '\n';
  const CameraIntrinsics& K = manifest.intrinsics;
  out << "intrinsics " << K.fx << ' ' << K.fy << ' ' << K.cx << ' ' << K.cy << ' '
      << K.width << ' ' << K.height << '\n';
  out << "depth_scale " << manifest.depth_scale << '\n';
  out << "feature_dim " << manifest.feature.dim << '\n';
  out << "feature_seed " << manifest.feature.seed << '\n';
  out << "feature_pose_scale " << manifest.feature.pose_scale << '\n';
  out << "feature_freq_scale " << manifest.feature.freq_scale << '\n';
  out << "feature_noise " << manifest.feature.noise << '\n';
  for (const auto& seq : manifest.sequences) {
    out << "sequence " << seq.name << ' ' << seq.split << ' ' << seq.frame_count << '\n';
  }
  if (!out) {
    throw IoError("failed writing manifest " + path.string());
  }
}

// --- feature model -----------------------------------------------------------

FeatureModel::FeatureModel(const FeatureModelParams& params) : params_(params) {
  if (params_.dim < 7) {
    throw DomainError("feature dim must be >= 7");
  }
  if (params_.noise < 0.0) {
    throw DomainError("feature noise must be >= 0");
  }
  const int extra = params_.dim - 7;
  omega_.resize(extra, 7);
  phase_.resize(extra);
  std::mt19937_64 rng(splitmix64(params_.seed));
  for (int j = 0; j < extra; ++j) {
    for (int k = 0; k < 7; ++k) {
      omega_(j, k) = uniform_real(rng, -params_.freq_scale, params_.freq_scale);
    }
  }
  for (int j = 0; j < extra; ++j) {
    phase_(j) = uniform_real(rng, 0.0, 2.0 * M_PI);
  }
}

Eigen::VectorXd FeatureModel::features(const Pose& pose, std::string_view frame_id) const {
  Eigen::VectorXd p(7);
  p << params_.pose_scale * pose.t, pose.q.w, pose.q.x, pose.q.y, pose.q.z;

  Eigen::VectorXd f(params_.dim);
  f.head<7>() = p;
  for (int j = 0; j + 7 < params_.dim; ++j) {
    f(7 + j) = std::sin(omega_.row(j).dot(p) + phase_(j));
  }
  if (params_.noise > 0.0) {
    std::mt19937_64 rng(splitmix64(fnv1a_hash(frame_id) ^ params_.seed ^ kFeatureNoiseSalt));
    for (int i = 0; i < params_.dim; ++i) {
      f(i) += uniform_real(rng, -params_.noise, params_.noise);
    }
  }
  return f;
}

// --- scenes --------------------------------------------------------------------

const Frame& Scene::frame(std::string_view id) const {
  for (const auto& f : frames) {
    if (f.id == id) {
      return f;
    }
  }
  throw DomainError("unknown frame id: " + std::string(id));
}

std::vector<const Frame*> Scene::database_frames() const {
  std::vector<const Frame*> out;
  for (const auto& f : frames) {
    if (!f.is_query) out.push_back(&f);
  }
  return out;
}

std::vector<const Frame*> Scene::query_frames() const {
  std::vector<const Frame*> out;
  for (const auto& f : frames) {
    if (f.is_query) out.push_back(&f);
  }
  return out;
}

Scene load_scene(const std::filesystem::path& root) {
  Scene scene;
  scene.manifest = load_manifest(root / "manifest.txt");
  const FeatureModel model(scene.manifest.feature);
  for (const auto& seq : scene.manifest.sequences) {
    for (int i = 0; i < seq.frame_count; ++i) {
      const std::string name = format_frame_name(i);
      const auto pose_path = root / seq.name / (name + ".pose.txt");
      const auto depth_path = root / seq.name / (name + ".depth.png");
      for (const auto& p : {pose_path, depth_path}) {
        if (!std::filesystem::exists(p)) {
          throw IoError("manifest references missing file " + p.string());
        }
      }
      Frame frame;
      frame.id = seq.name + "/" + name;
      frame.pose = load_pose_file(pose_path);
      frame.depth = load_depth_png(depth_path, scene.manifest.intrinsics,
                                   scene.manifest.depth_scale);
      frame.features = model.features(frame.pose, frame.id);
      frame.is_query = (seq.split == "test");
      scene.frames.push_back(std::move(frame));
    }
  }
  return scene;
}

void export_scene(const Scene& scene, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  save_manifest(root / "manifest.txt", scene.manifest);
  for (const auto& frame : scene.frames) {
    const auto slash = frame.id.find('/');
    if (slash == std::string::npos) {
      throw DomainError("frame id without sequence prefix: " + frame.id);
    }
    const auto dir = root / frame.id.substr(0, slash);
    std::filesystem::create_directories(dir);
    const std::string name = frame.id.substr(slash + 1);
    save_pose_file(dir / (name + ".pose.txt"), frame.pose);
    save_depth_png(dir / (name + ".depth.png"), frame.depth, scene.manifest.depth_scale);
  }
}

// --- synthetic generation -------------------------------------------------------

UnitQuaternion look_at_rotation(const Eigen::Vector3d& position,
                                const Eigen::Vector3d& target, double roll) {
  const Eigen::Vector3d offset = target - position;
  if (offset.norm() < 1e-12) {
    throw DomainError("look-at target coincides with camera position");
  }
  const Eigen::Vector3d f = offset.normalized();
  Eigen::Vector3d up(0.0, 1.0, 0.0);
  if (std::abs(f.y()) > 0.999) {
    up = Eigen::Vector3d(1.0, 0.0, 0.0);
  }
  const Eigen::Vector3d r = up.cross(f).normalized();
  const Eigen::Vector3d d = f.cross(r);
  Eigen::Matrix3d R;
  R.col(0) = r;
  R.col(1) = d;
  R.col(2) = f;
  Eigen::Matrix3d Rz = Eigen::Matrix3d::Identity();
  Rz(0, 0) = std::cos(roll);
  Rz(0, 1) = -std::sin(roll);
  Rz(1, 0) = std::sin(roll);
  Rz(1, 1) = std::cos(roll);
  return UnitQuaternion::from_rotation_matrix(R * Rz);
}

void SyntheticSceneConfig::validate() const {
  intrinsics.validate();
  if (!(workspace_extent.minCoeff() > 0.0)) {
    throw DomainError("workspace extents must be positive");
  }
  if (!(plane_distance > 0.0)) {
    throw DomainError("plane distance must be positive");
  }
  if (database_frames <= 0 || query_frames < 0) {
    throw DomainError("need at least one database frame and >= 0 query frames");
  }
  if (depth_noise < 0.0 || !(depth_scale > 0.0)) {
    throw DomainError("depth noise must be >= 0 and depth scale > 0");
  }
  if (layout == SceneLayout::kOrbit && (!(orbit_radius > 0.0) || orbit_target_swing < 0.0)) {
    throw DomainError("orbit radius must be > 0 and target swing >= 0");
  }
  if (trajectory_jitter_t < 0.0 || trajectory_jitter_r_deg < 0.0) {
    throw DomainError("trajectory jitter amounts must be >= 0");
  }
  if (feature.dim < 7) {
    throw DomainError("feature dim must be >= 7");
  }
}

namespace {

Pose sample_box_pose(const SyntheticSceneConfig& cfg, std::mt19937_64& rng) {
  const Eigen::Vector3d half = cfg.workspace_extent / 2.0;
  Pose pose;
  pose.t = Eigen::Vector3d(uniform_real(rng, -half.x(), half.x()),
                           uniform_real(rng, -half.y(), half.y()),
                           uniform_real(rng, -half.z(), half.z()));
  const Eigen::Vector3d target(uniform_real(rng, -half.x(), half.x()) * 0.75,
                               uniform_real(rng, -half.y(), half.y()) * 0.75,
                               cfg.plane_distance);
  const double roll = uniform_real(rng, -0.6, 0.6);
  pose.q = look_at_rotation(pose.t, target, roll);
  return pose;
}

// Ring of cameras: the roll tracks the azimuth so distant frames disagree in
// orientation, and the look-at point swings at triple frequency so overlap
// sweeps from near-total (theta apart by ~2pi/3, coincident targets) down to
// marginal (opposite target phases).
Pose orbit_pose(const SyntheticSceneConfig& cfg, double theta) {
  Pose pose;
  pose.t = Eigen::Vector3d(cfg.orbit_radius * std::cos(theta),
                           cfg.orbit_radius * std::sin(theta),
                           0.1 * cfg.workspace_extent.z() * std::sin(2.0 * theta));
  const Eigen::Vector3d target(cfg.orbit_target_swing * std::cos(3.0 * theta),
                               cfg.orbit_target_swing * std::sin(3.0 * theta),
                               cfg.plane_distance);
  pose.q = look_at_rotation(pose.t, target, theta);
  return pose;
}

}  // namespace

DepthFrame render_plane_depth(const SyntheticSceneConfig& cfg, const Pose& pose,
                              std::uint64_t noise_seed) {
  const CameraIntrinsics& K = cfg.intrinsics;
  DepthFrame frame;
  frame.intrinsics = K;
  frame.depth.setZero(K.height, K.width);
  frame.valid.setZero(K.height, K.width);

  const Eigen::Matrix3d R = quat_to_rotation_matrix(pose.q);
  std::mt19937_64 noise_rng(splitmix64(noise_seed));
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const Eigen::Vector3d dir_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
      const Eigen::Vector3d dir_world = R * dir_cam;
      if (!(dir_world.z() > 1e-12)) {
        continue;  // ray parallel to or away from the plane
      }
      // dir_cam.z == 1, so the ray parameter is the camera-frame z depth.
      double z = (cfg.plane_distance - pose.t.z()) / dir_world.z();
      if (cfg.depth_noise > 0.0) {
        z += uniform_real(noise_rng, -cfg.depth_noise, cfg.depth_noise);
      }
      const long long q = std::llround(z / cfg.depth_scale);
      if (q < 1 || q > 65534) {
        continue;
      }
      frame.depth(v, u) = static_cast<double>(q) * cfg.depth_scale;
      frame.valid(v, u) = 1;
    }
  }
  return frame;
}

Scene generate_synthetic_scene(const SyntheticSceneConfig& config) {
  config.validate();

  Scene scene;
  scene.manifest.scene_name = config.name;
  scene.manifest.intrinsics = config.intrinsics;
  scene.manifest.depth_scale = config.depth_scale;
  scene.manifest.feature = config.feature;
  scene.manifest.feature.seed = splitmix64(config.seed ^ config.feature.seed);
  scene.manifest.sequences = {
      SequenceInfo{"seq-01", "train", config.database_frames},
      SequenceInfo{"seq-02", "test", config.query_frames},
  };

  const FeatureModel model(scene.manifest.feature);
  std::mt19937_64 rng(splitmix64(config.seed));

  const auto jitter_pose = [&](Pose pose) {
    if (config.trajectory_jitter_t > 0.0) {
      for (int a = 0; a < 3; ++a) {
        pose.t(a) +=
            uniform_real(rng, -config.trajectory_jitter_t, config.trajectory_jitter_t);
      }
    }
    if (config.trajectory_jitter_r_deg > 0.0) {
      const double z = uniform_real(rng, -1.0, 1.0);
      const double phi = uniform_real(rng, 0.0, 2.0 * M_PI);
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Eigen::Vector3d axis(rho * std::cos(phi), rho * std::sin(phi), z);
      const double angle =
          uniform_real(rng, 0.0, config.trajectory_jitter_r_deg * M_PI / 180.0);
      pose.q = quat_multiply(pose.q, UnitQuaternion::from_axis_angle(axis, angle));
    }
    return pose;
  };

  const auto add_frame = [&](const SequenceInfo& seq, int index, const Pose& pose) {
    Frame frame;
    frame.id = seq.name + "/" + format_frame_name(index);
    frame.pose = pose;
    frame.depth = render_plane_depth(
        config, pose, fnv1a_hash(frame.id) ^ config.seed ^ kDepthNoiseSalt);
    frame.features = model.features(pose, frame.id);
    frame.is_query = (seq.split == "test");
    if (frame.depth.valid_count() == 0) {
      throw DomainError("generated frame " + frame.id + " sees no plane surface");
    }
    scene.frames.push_back(std::move(frame));
  };

  const auto& db_seq = scene.manifest.sequences[0];
  for (int i = 0; i < config.database_frames; ++i) {
    if (config.layout == SceneLayout::kOrbit) {
      add_frame(db_seq, i,
                jitter_pose(orbit_pose(config, 2.0 * M_PI * i / config.database_frames)));
    } else {
      add_frame(db_seq, i, sample_box_pose(config, rng));
    }
  }
  const auto& query_seq = scene.manifest.sequences[1];
  for (int i = 0; i < config.query_frames; ++i) {
    if (config.layout == SceneLayout::kOrbit) {
      const double step = 2.0 * M_PI / config.query_frames;
      const double theta = step * (i + 0.5) + uniform_real(rng, -0.05, 0.05);
      add_frame(query_seq, i, jitter_pose(orbit_pose(config, theta)));
    } else {
      add_frame(query_seq, i, sample_box_pose(config, rng));
    }
  }
  return scene;
}

}  // namespace reloc
