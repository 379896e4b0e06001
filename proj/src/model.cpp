#include "reloc/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "reloc/errors.hpp"
#include "reloc/rng.hpp"

namespace reloc {

// --- config / layout -----------------------------------------------------------

void EncoderConfig::validate() const {
  if (input_dim < 1) {
    throw DomainError("encoder input_dim must be >= 1");
  }
  for (int d : block_dims) {
    if (d < 1) {
      throw DomainError("encoder block dims must be >= 1");
    }
  }
}

std::uint64_t EncoderConfig::digest() const {
  std::ostringstream canon;
  canon << "input_dim=" << input_dim << ";dims=" << block_dims[0] << ','
        << block_dims[1] << ',' << block_dims[2] << ',' << block_dims[3]
        << ";seed=" << seed;
  return fnv1a_hash(canon.str());
}

int ParamLayout::check_stage(int stage) {
  if (stage < 1 || stage > kNumStages) {
    throw DomainError("stage index must be in 1..4");
  }
  return stage - 1;
}

ParamLayout::ParamLayout(const EncoderConfig& config) {
  config.validate();
  Eigen::Index offset = 0;
  const auto add = [&offset](Block& b, Eigen::Index rows, Eigen::Index cols) {
    b.offset = offset;
    b.rows = rows;
    b.cols = cols;
    offset += rows * cols;
  };
  int in_dim = config.input_dim;
  for (int k = 0; k < kNumStages; ++k) {
    add(stage_w_[k], config.block_dims[k], in_dim);
    add(stage_b_[k], config.block_dims[k], 1);
    in_dim = config.block_dims[k];
  }
  for (int k = 0; k < kNumStages; ++k) {
    add(head_w_[k], kHeadOutputs, 2 * config.block_dims[k]);
    add(head_b_[k], kHeadOutputs, 1);
  }
  add(frustum_w_, kFrustumOutputs, 2 * config.block_dims[0]);
  add(frustum_b_, kFrustumOutputs, 1);
  add(angle_w_, kAngleOutputs, 2 * config.block_dims[0]);
  add(angle_b_, kAngleOutputs, 1);
  beta_hat_ = offset++;
  gamma_hat_ = offset++;
  total_ = offset;
}

Eigen::Index ParamLayout::distilled_size() const {
  return stage_w_[0].size() + stage_b_[0].size() + head_w_[0].size() +
         head_b_[0].size() + frustum_w_.size() + frustum_b_.size() +
         angle_w_.size() + angle_b_.size() + 2;
}

bool ParamLayout::is_distilled_offset(Eigen::Index offset) const {
  const auto in_block = [offset](const Block& b) {
    return offset >= b.offset && offset < b.offset + b.size();
  };
  return in_block(stage_w_[0]) || in_block(stage_b_[0]) || in_block(head_w_[0]) ||
         in_block(head_b_[0]) || in_block(frustum_w_) || in_block(frustum_b_) ||
         in_block(angle_w_) || in_block(angle_b_) || offset == beta_hat_ ||
         offset == gamma_hat_;
}

ParamLayout ModelParams::layout() const {
  return ParamLayout(config);
}

Eigen::Map<const Eigen::MatrixXd> ModelParams::block(const ParamLayout::Block& b) const {
  return {values.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<Eigen::MatrixXd> ModelParams::block(const ParamLayout::Block& b) {
  return {values.data() + b.offset, b.rows, b.cols};
}

double ModelParams::beta_hat() const { return values(layout().beta_hat()); }
double ModelParams::gamma_hat() const { return values(layout().gamma_hat()); }
double& ModelParams::beta_hat() { return values(layout().beta_hat()); }
double& ModelParams::gamma_hat() { return values(layout().gamma_hat()); }

ModelParams init_model(const EncoderConfig& config) {
  const ParamLayout layout(config);
  ModelParams params;
  params.config = config;
  params.values.setZero(layout.total_size());

  std::mt19937_64 rng(splitmix64(config.seed));
  const auto fill = [&](const ParamLayout::Block& weight, const ParamLayout::Block& bias,
                        Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < weight.size(); ++i) {
      params.values(weight.offset + i) = uniform_real(rng, -bound, bound);
    }
    for (Eigen::Index i = 0; i < bias.size(); ++i) {
      params.values(bias.offset + i) = uniform_real(rng, -bound, bound);
    }
  };
  for (int k = 1; k <= kNumStages; ++k) {
    fill(layout.stage_weight(k), layout.stage_bias(k), layout.stage_weight(k).cols);
  }
  for (int k = 1; k <= kNumStages; ++k) {
    fill(layout.head_weight(k), layout.head_bias(k), layout.head_weight(k).cols);
  }
  fill(layout.frustum_weight(), layout.frustum_bias(), layout.frustum_weight().cols);
  fill(layout.angle_weight(), layout.angle_bias(), layout.angle_weight().cols);
  // beta_hat / gamma_hat start at 0 (setZero above).
  return params;
}

ModelParams zeros_like(const EncoderConfig& config) {
  ModelParams params;
  params.config = config;
  params.values.setZero(ParamLayout(config).total_size());
  return params;
}

// --- forward -------------------------------------------------------------------

EncodeTrace encode_batch(const ModelParams& params, const Eigen::MatrixXd& inputs,
                         int stages) {
  if (stages < 1 || stages > kNumStages) {
    throw DomainError("encode stage count must be in 1..4");
  }
  if (inputs.rows() != params.config.input_dim) {
    throw ShapeMismatch("encoder input has " + std::to_string(inputs.rows()) +
                        " rows, config expects " + std::to_string(params.config.input_dim));
  }
  if (!inputs.allFinite()) {
    throw DomainError("encoder input contains non-finite values");
  }
  const ParamLayout layout(params.config);
  EncodeTrace trace;
  trace.input = inputs;
  trace.stages = stages;
  const Eigen::MatrixXd* x = &trace.input;
  for (int k = 1; k <= stages; ++k) {
    const auto W = params.block(layout.stage_weight(k));
    const auto b = params.block(layout.stage_bias(k));
    trace.act[k - 1] = ((W * (*x)).colwise() + b.col(0)).array().tanh().matrix();
    x = &trace.act[k - 1];
  }
  return trace;
}

EmbeddingStack encode(const ModelParams& params, const Eigen::VectorXd& input) {
  const EncodeTrace trace = encode_batch(params, input, kNumStages);
  EmbeddingStack stack;
  for (int k = 0; k < kNumStages; ++k) {
    stack.e[k] = trace.act[k].col(0);
  }
  return stack;
}

void encode_backward(const ModelParams& params, const EncodeTrace& trace,
                     const std::array<Eigen::MatrixXd, kNumStages>& embedding_grads,
                     Eigen::VectorXd& grad) {
  const ParamLayout layout(params.config);
  if (grad.size() != layout.total_size()) {
    throw ShapeMismatch("gradient vector does not match parameter layout");
  }
  Eigen::MatrixXd downstream;  // d(loss)/d(act[k]) flowing from stage k+1
  for (int k = trace.stages; k >= 1; --k) {
    const Eigen::MatrixXd& act = trace.act[k - 1];
    Eigen::MatrixXd de;
    if (embedding_grads[k - 1].size() > 0) {
      de = embedding_grads[k - 1];
      if (downstream.size() > 0) {
        de += downstream;
      }
    } else if (downstream.size() > 0) {
      de = std::move(downstream);
    } else {
      downstream.resize(0, 0);
      continue;  // nothing depends on this or any later stage
    }
    // d(pre-activation) through tanh: 1 - act^2.
    const Eigen::MatrixXd da = (de.array() * (1.0 - act.array().square())).matrix();
    const Eigen::MatrixXd& x = (k == 1) ? trace.input : trace.act[k - 2];
    const auto Wb = layout.stage_weight(k);
    const auto bb = layout.stage_bias(k);
    Eigen::Map<Eigen::MatrixXd>(grad.data() + Wb.offset, Wb.rows, Wb.cols) +=
        da * x.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + bb.offset, bb.rows) += da.rowwise().sum();
    if (k > 1) {
      downstream = params.block(Wb).transpose() * da;
    }
  }
}

// --- heads ----------------------------------------------------------------------

Eigen::MatrixXd pair_head_forward(const ModelParams& params,
                                  const ParamLayout::Block& weight,
                                  const ParamLayout::Block& bias,
                                  const Eigen::MatrixXd& e_a, const Eigen::MatrixXd& e_b) {
  if (e_a.rows() != e_b.rows() || e_a.cols() != e_b.cols()) {
    throw ShapeMismatch("pair embeddings must have identical shapes");
  }
  if (2 * e_a.rows() != weight.cols) {
    throw ShapeMismatch("head expects concatenated input length " +
                        std::to_string(weight.cols) + ", got " +
                        std::to_string(2 * e_a.rows()));
  }
  const auto W = params.block(weight);
  const auto b = params.block(bias);
  const Eigen::Index d = e_a.rows();
  return ((W.leftCols(d) * e_a + W.rightCols(d) * e_b).colwise() + b.col(0));
}

void pair_head_backward(const ModelParams& params, const ParamLayout::Block& weight,
                        const ParamLayout::Block& bias, const Eigen::MatrixXd& e_a,
                        const Eigen::MatrixXd& e_b, const Eigen::MatrixXd& d_y,
                        Eigen::VectorXd& grad, Eigen::MatrixXd& d_e_a,
                        Eigen::MatrixXd& d_e_b) {
  const Eigen::Index d = e_a.rows();
  Eigen::Map<Eigen::MatrixXd> gW(grad.data() + weight.offset, weight.rows, weight.cols);
  gW.leftCols(d) += d_y * e_a.transpose();
  gW.rightCols(d) += d_y * e_b.transpose();
  Eigen::Map<Eigen::VectorXd>(grad.data() + bias.offset, bias.rows) +=
      d_y.rowwise().sum();
  const auto W = params.block(weight);
  if (d_e_a.size() == 0) d_e_a.setZero(e_a.rows(), e_a.cols());
  if (d_e_b.size() == 0) d_e_b.setZero(e_b.rows(), e_b.cols());
  d_e_a += W.leftCols(d).transpose() * d_y;
  d_e_b += W.rightCols(d).transpose() * d_y;
}

RelativePose HeadPrediction::to_relative_pose() const {
  const double norm = q_raw.norm();
  if (norm < 1e-8) {
    throw DegenerateQuaternion("regressed quaternion has near-zero norm " +
                               std::to_string(norm));
  }
  RelativePose rel;
  rel.dt = t;
  rel.dq = UnitQuaternion(q_raw(0), q_raw(1), q_raw(2), q_raw(3));
  return rel;
}

HeadPrediction regress_relative_pose(const ModelParams& params, int stage,
                                     const Eigen::VectorXd& e_db,
                                     const Eigen::VectorXd& e_q) {
  const ParamLayout layout(params.config);
  const Eigen::MatrixXd y = pair_head_forward(params, layout.head_weight(stage),
                                              layout.head_bias(stage), e_db, e_q);
  HeadPrediction pred;
  pred.t = y.col(0).head<3>();
  pred.q_raw = y.col(0).tail<4>();
  return pred;
}

std::pair<double, double> predict_frustum(const ModelParams& params,
                                          const Eigen::VectorXd& e_a,
                                          const Eigen::VectorXd& e_b) {
  const ParamLayout layout(params.config);
  const Eigen::MatrixXd y = pair_head_forward(params, layout.frustum_weight(),
                                              layout.frustum_bias(), e_a, e_b);
  return {y(0, 0), y(1, 0)};
}

double predict_angle(const ModelParams& params, const Eigen::VectorXd& e_a,
                     const Eigen::VectorXd& e_b) {
  const ParamLayout layout(params.config);
  const Eigen::MatrixXd y = pair_head_forward(params, layout.angle_weight(),
                                              layout.angle_bias(), e_a, e_b);
  return y(0, 0);
}

// --- checkpoints ------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'R', 'F', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw ParseError("checkpoint " + path + " is truncated");
  }
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  const ParamLayout layout(params.config);
  if (params.values.size() != layout.total_size()) {
    throw ShapeMismatch("parameter vector does not match its config layout");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write checkpoint " + path.string());
  }
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint32_t>(params.config.input_dim));
  for (int d : params.config.block_dims) {
    write_pod(out, static_cast<std::uint32_t>(d));
  }
  write_pod(out, params.config.seed);
  write_pod(out, params.config.digest());
  write_pod(out, static_cast<std::uint64_t>(params.values.size()));
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    write_pod(out, static_cast<float>(params.values(i)));
  }
  if (!out) {
    throw IoError("failed writing checkpoint " + path.string());
  }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint " + path.string());
  }
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw UnsupportedFormat("not a checkpoint file: " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, path.string());
  if (version != kCheckpointVersion) {
    throw UnsupportedFormat("checkpoint " + path.string() + " has unsupported version " +
                            std::to_string(version));
  }
  EncoderConfig config;
  config.input_dim = static_cast<int>(read_pod<std::uint32_t>(in, path.string()));
  for (int k = 0; k < kNumStages; ++k) {
    config.block_dims[k] = static_cast<int>(read_pod<std::uint32_t>(in, path.string()));
  }
  config.seed = read_pod<std::uint64_t>(in, path.string());
  const auto digest = read_pod<std::uint64_t>(in, path.string());
  if (digest != config.digest()) {
    throw ParseError("checkpoint " + path.string() + " has a config digest mismatch");
  }
  const ParamLayout layout(config);
  const auto count = read_pod<std::uint64_t>(in, path.string());
  if (count != static_cast<std::uint64_t>(layout.total_size())) {
    throw ParseError("checkpoint " + path.string() + " holds " + std::to_string(count) +
                     " parameters, layout expects " + std::to_string(layout.total_size()));
  }
  ModelParams params;
  params.config = config;
  params.values.resize(layout.total_size());
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    params.values(i) = read_pod<float>(in, path.string());
  }
  return params;
}

}  // namespace reloc
