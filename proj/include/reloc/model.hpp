#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "reloc/pose.hpp"

namespace reloc {

inline constexpr int kNumStages = 4;
inline constexpr int kHeadOutputs = 7;     // 3 translation + 4 raw quaternion
inline constexpr int kFrustumOutputs = 2;  // (d1_hat, d2_hat)
inline constexpr int kAngleOutputs = 1;

struct EncoderConfig {
  int input_dim = 64;
  std::array<int, kNumStages> block_dims{64, 128, 256, 512};
  std::uint64_t seed = 1;

  void validate() const;          // DomainError on non-positive dims
  std::uint64_t digest() const;   // stable hash of all fields
};

// Flat offsets of every parameter block. The serialized order is fixed:
// stage 1..4 (weight then bias), pose heads 1..4 (weight then bias),
// frustum head, angle head, beta_hat, gamma_hat. Weight matrices are stored
// column-major.
class ParamLayout {
 public:
  struct Block {
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index size() const { return rows * cols; }
  };

  explicit ParamLayout(const EncoderConfig& config);

  const Block& stage_weight(int stage) const { return stage_w_[check_stage(stage)]; }
  const Block& stage_bias(int stage) const { return stage_b_[check_stage(stage)]; }
  const Block& head_weight(int stage) const { return head_w_[check_stage(stage)]; }
  const Block& head_bias(int stage) const { return head_b_[check_stage(stage)]; }
  const Block& frustum_weight() const { return frustum_w_; }
  const Block& frustum_bias() const { return frustum_b_; }
  const Block& angle_weight() const { return angle_w_; }
  const Block& angle_bias() const { return angle_b_; }
  Eigen::Index beta_hat() const { return beta_hat_; }
  Eigen::Index gamma_hat() const { return gamma_hat_; }

  Eigen::Index total_size() const { return total_; }
  // Parameters kept by distillation: stage 1, pose head 1, both auxiliary
  // heads and the two homoscedastic scalars.
  Eigen::Index distilled_size() const;
  bool is_distilled_offset(Eigen::Index offset) const;

 private:
  static int check_stage(int stage);

  std::array<Block, kNumStages> stage_w_, stage_b_, head_w_, head_b_;
  Block frustum_w_, frustum_b_, angle_w_, angle_b_;
  Eigen::Index beta_hat_ = 0;
  Eigen::Index gamma_hat_ = 0;
  Eigen::Index total_ = 0;
};

struct ModelParams {
  EncoderConfig config;
  Eigen::VectorXd values;

  // Layout construction is arithmetic only; building one per use is cheap.
  ParamLayout layout() const;

  Eigen::Map<const Eigen::MatrixXd> block(const ParamLayout::Block& b) const;
  Eigen::Map<Eigen::MatrixXd> block(const ParamLayout::Block& b);

  double beta_hat() const;
  double gamma_hat() const;
  double& beta_hat();
  double& gamma_hat();
};

// Uniform +-1/sqrt(fan_in) weights and biases from the config seed;
// beta_hat = gamma_hat = 0.
ModelParams init_model(const EncoderConfig& config);
ModelParams zeros_like(const EncoderConfig& config);

// --- forward passes ----------------------------------------------------------

struct EmbeddingStack {
  std::array<Eigen::VectorXd, kNumStages> e;  // e[k] has block_dims[k] entries
};

// Cached activations for one batch (columns are samples). act[k] is the
// stage-k embedding tanh output; stages beyond `stages` are left empty.
struct EncodeTrace {
  Eigen::MatrixXd input;
  std::array<Eigen::MatrixXd, kNumStages> act;
  int stages = kNumStages;
};

// e_k = tanh(W_k e_{k-1} + b_k) with e_0 = input; e_k depends only on
// stages 1..k. Throws ShapeMismatch on a wrong input length.
EmbeddingStack encode(const ModelParams& params, const Eigen::VectorXd& input);

EncodeTrace encode_batch(const ModelParams& params, const Eigen::MatrixXd& inputs,
                         int stages = kNumStages);

// Accumulates parameter gradients for d(loss)/d(act[k]) passed in
// `embedding_grads` (empty matrices are treated as zero), walking the chain
// back to stage 1. grad must have layout size.
void encode_backward(const ModelParams& params, const EncodeTrace& trace,
                     const std::array<Eigen::MatrixXd, kNumStages>& embedding_grads,
                     Eigen::VectorXd& grad);

// --- heads ---------------------------------------------------------------------

// Raw head output: translation plus unnormalized quaternion. The raw vector
// feeds the loss; to_relative_pose normalizes (throws DegenerateQuaternion
// below norm 1e-8) for composition.
struct HeadPrediction {
  Eigen::Vector3d t;
  Eigen::Vector4d q_raw;  // (w, x, y, z)

  RelativePose to_relative_pose() const;
};

// Pose head `stage` (1-based) on the concatenated pair embedding
// [e_db; e_q]; input length must be 2 * block_dims[stage-1].
HeadPrediction regress_relative_pose(const ModelParams& params, int stage,
                                     const Eigen::VectorXd& e_db,
                                     const Eigen::VectorXd& e_q);

std::pair<double, double> predict_frustum(const ModelParams& params,
                                          const Eigen::VectorXd& e_a,
                                          const Eigen::VectorXd& e_b);

double predict_angle(const ModelParams& params, const Eigen::VectorXd& e_a,
                     const Eigen::VectorXd& e_b);

// Batch affine head y = W [A; B] + b for the given weight/bias blocks.
Eigen::MatrixXd pair_head_forward(const ModelParams& params,
                                  const ParamLayout::Block& weight,
                                  const ParamLayout::Block& bias,
                                  const Eigen::MatrixXd& e_a, const Eigen::MatrixXd& e_b);

// Accumulates head parameter gradients for upstream dY and adds the chain
// contributions to the pair embedding gradients.
void pair_head_backward(const ModelParams& params, const ParamLayout::Block& weight,
                        const ParamLayout::Block& bias, const Eigen::MatrixXd& e_a,
                        const Eigen::MatrixXd& e_b, const Eigen::MatrixXd& d_y,
                        Eigen::VectorXd& grad, Eigen::MatrixXd& d_e_a,
                        Eigen::MatrixXd& d_e_b);

// --- checkpoints ----------------------------------------------------------------

// Binary checkpoint: magic RFCK, version, config fields, config digest,
// then every parameter as little-endian float32 in layout order.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace reloc
