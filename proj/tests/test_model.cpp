#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "reloc/errors.hpp"
#include "reloc/model.hpp"
#include "reloc/pose.hpp"

using namespace reloc;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("reloc_model_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.input_dim = 3;
  cfg.block_dims = {3, 4, 5, 6};
  cfg.seed = 5;
  return cfg;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      m(r, c) = u(rng);
    }
  }
  return m;
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("default layout sizes match the hand-computed ledger") {
  const EncoderConfig cfg;  // 64 -> 64/128/256/512
  const ParamLayout layout(cfg);
  // Stages: 64*64+64, 128*64+128, 256*128+256, 512*256+512.
  // Pose heads on [e_db; e_q]: 7*(2*64)+7, 7*(2*128)+7, 7*(2*256)+7, 7*(2*512)+7.
  // Frustum 2*(2*64)+2, angle 1*(2*64)+1, plus the two weighting scalars.
  CHECK(layout.total_size() == 190945);
  // Distilled: stage 1, pose head 1, frustum, angle, beta, gamma.
  CHECK(layout.distilled_size() == 5452);
  // That is a 97.1% reduction, comfortably past 95%.
  CHECK(static_cast<double>(layout.distilled_size()) / layout.total_size() < 0.05);

  Eigen::Index marked = 0;
  for (Eigen::Index i = 0; i < layout.total_size(); ++i) {
    marked += layout.is_distilled_offset(i) ? 1 : 0;
  }
  CHECK(marked == layout.distilled_size());
  CHECK(layout.is_distilled_offset(layout.stage_weight(1).offset));
  CHECK(layout.is_distilled_offset(layout.head_bias(1).offset));
  CHECK(layout.is_distilled_offset(layout.frustum_weight().offset));
  CHECK(layout.is_distilled_offset(layout.angle_bias().offset));
  CHECK(layout.is_distilled_offset(layout.beta_hat()));
  CHECK(layout.is_distilled_offset(layout.gamma_hat()));
  CHECK(!layout.is_distilled_offset(layout.stage_weight(2).offset));
  CHECK(!layout.is_distilled_offset(layout.head_weight(3).offset));

  // Blocks tile the vector without gaps: beta/gamma are the last two slots.
  CHECK(layout.gamma_hat() == layout.total_size() - 1);
  CHECK(layout.beta_hat() == layout.total_size() - 2);

  EncoderConfig bad = cfg;
  bad.block_dims[2] = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = cfg;
  bad.input_dim = -1;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("initialization is seeded and bounded by fan-in") {
  const EncoderConfig cfg = tiny_config();
  const ModelParams a = init_model(cfg);
  const ModelParams b = init_model(cfg);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.beta_hat() == 0.0);
  CHECK(a.gamma_hat() == 0.0);

  EncoderConfig other = cfg;
  other.seed = 6;
  const ModelParams c = init_model(other);
  CHECK((a.values - c.values).cwiseAbs().maxCoeff() > 0.0);
  CHECK(cfg.digest() != other.digest());

  const ParamLayout layout(cfg);
  const auto check_block = [&](const ParamLayout::Block& w, Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      CHECK(std::abs(a.values(w.offset + i)) <= bound);
    }
  };
  check_block(layout.stage_weight(1), cfg.input_dim);
  check_block(layout.stage_weight(2), cfg.block_dims[0]);
  check_block(layout.head_weight(1), 2 * cfg.block_dims[0]);
  check_block(layout.frustum_weight(), 2 * cfg.block_dims[0]);

  const ModelParams z = zeros_like(cfg);
  CHECK(z.values.size() == layout.total_size());
  CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder stages chain tanh affine maps") {
  const EncoderConfig cfg = tiny_config();
  const ModelParams params = init_model(cfg);
  const ParamLayout layout(cfg);

  std::mt19937_64 rng(3);
  const Eigen::VectorXd x = random_matrix(cfg.input_dim, 1, rng);

  const EmbeddingStack stack = encode(params, x);
  // Independent recomputation of the chain.
  Eigen::VectorXd e = x;
  for (int k = 1; k <= kNumStages; ++k) {
    const auto W = params.block(layout.stage_weight(k));
    const auto bvec = params.block(layout.stage_bias(k));
    e = (W * e + bvec.col(0)).array().tanh().matrix();
    CHECK((stack.e[k - 1] - e).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(stack.e[k - 1].cwiseAbs().maxCoeff() < 1.0);  // tanh range
  }

  // Zero parameters squash everything to zero.
  const EmbeddingStack zero = encode(zeros_like(cfg), x);
  for (const auto& ek : zero.e) {
    CHECK(ek.cwiseAbs().maxCoeff() == 0.0);
  }

  // Early embeddings never depend on later stages.
  ModelParams poked = params;
  const auto w3 = layout.stage_weight(3);
  poked.values.segment(w3.offset, w3.size()).array() += 0.5;
  const EmbeddingStack after = encode(poked, x);
  CHECK((after.e[0] - stack.e[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((after.e[1] - stack.e[1]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((after.e[2] - stack.e[2]).cwiseAbs().maxCoeff() > 0.0);

  // Batch encoding equals per-sample encoding column by column.
  const Eigen::MatrixXd batch = random_matrix(cfg.input_dim, 5, rng);
  const EncodeTrace trace = encode_batch(params, batch);
  for (int c = 0; c < 5; ++c) {
    const EmbeddingStack single = encode(params, batch.col(c));
    for (int k = 0; k < kNumStages; ++k) {
      CHECK((trace.act[k].col(c) - single.e[k]).cwiseAbs().maxCoeff() < 1e-15);
    }
  }

  // Truncated traces stop at the requested stage.
  const EncodeTrace short_trace = encode_batch(params, batch, 2);
  CHECK(short_trace.act[0].cols() == 5);
  CHECK(short_trace.act[1].cols() == 5);
  CHECK(short_trace.act[2].size() == 0);
  CHECK(short_trace.act[3].size() == 0);

  Eigen::VectorXd wrong(cfg.input_dim + 1);
  wrong.setZero();
  CHECK_THROWS_AS(encode(params, wrong), ShapeMismatch);
  CHECK_THROWS_AS(encode_batch(params, wrong), ShapeMismatch);
}

TEST_CASE("encoder backward pass matches finite differences") {
  const EncoderConfig cfg = tiny_config();
  ModelParams params = init_model(cfg);
  const ParamLayout layout(cfg);

  std::mt19937_64 rng(17);
  const Eigen::MatrixXd batch = random_matrix(cfg.input_dim, 3, rng);

  // Scalar functional: weighted sum over every stage activation.
  std::array<Eigen::MatrixXd, kNumStages> weights;
  for (int k = 0; k < kNumStages; ++k) {
    weights[k] = random_matrix(cfg.block_dims[k], 3, rng);
  }
  const auto value = [&](const ModelParams& p) {
    const EncodeTrace t = encode_batch(p, batch);
    double s = 0.0;
    for (int k = 0; k < kNumStages; ++k) {
      s += (weights[k].array() * t.act[k].array()).sum();
    }
    return s;
  };

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.total_size());
  const EncodeTrace trace = encode_batch(params, batch);
  encode_backward(params, trace, weights, grad);

  const double h = 1e-6;
  double max_err = 0.0;
  for (Eigen::Index i = 0; i < layout.total_size(); ++i) {
    const double saved = params.values(i);
    params.values(i) = saved + h;
    const double up = value(params);
    params.values(i) = saved - h;
    const double down = value(params);
    params.values(i) = saved;
    const double fd = (up - down) / (2.0 * h);
    max_err = std::max(max_err, std::abs(fd - grad(i)) / std::max(1.0, std::abs(fd)));
  }
  CHECK(max_err < 1e-6);

  // Heads and weighting scalars take no part in the encoder chain.
  CHECK(grad(layout.beta_hat()) == 0.0);
  CHECK(grad.segment(layout.head_weight(2).offset, layout.head_weight(2).size())
            .cwiseAbs()
            .maxCoeff() == 0.0);

  Eigen::VectorXd short_grad(3);
  CHECK_THROWS_AS(encode_backward(params, trace, weights, short_grad), ShapeMismatch);
}

TEST_CASE("pair heads compute affine maps of concatenated embeddings") {
  const EncoderConfig cfg = tiny_config();
  ModelParams params = zeros_like(cfg);
  const ParamLayout layout(cfg);

  std::mt19937_64 rng(23);
  const int d1 = cfg.block_dims[0];
  const Eigen::VectorXd ea = random_matrix(d1, 1, rng);
  const Eigen::VectorXd eb = random_matrix(d1, 1, rng);

  // Fill the frustum block with known values and verify by direct algebra.
  auto fw = params.block(layout.frustum_weight());
  auto fb = params.block(layout.frustum_bias());
  for (Eigen::Index c = 0; c < fw.cols(); ++c) {
    for (Eigen::Index r = 0; r < fw.rows(); ++r) {
      fw(r, c) = 0.01 * static_cast<double>(r + 2 * c);
    }
  }
  fb(0, 0) = 0.5;
  fb(1, 0) = -0.25;
  Eigen::VectorXd cat(2 * d1);
  cat << ea, eb;
  const Eigen::Vector2d expect =
      params.block(layout.frustum_weight()) * cat + params.block(layout.frustum_bias()).col(0);
  const auto [p1, p2] = predict_frustum(params, ea, eb);
  CHECK(p1 == doctest::Approx(expect(0)).epsilon(1e-15));
  CHECK(p2 == doctest::Approx(expect(1)).epsilon(1e-15));

  CHECK(predict_angle(params, ea, eb) == 0.0);  // untouched zero block

  // A pose head that is pure bias predicts that bias for any embeddings.
  auto hb = params.block(layout.head_bias(1));
  hb(3, 0) = 1.0;  // raw quaternion w
  const HeadPrediction pred = regress_relative_pose(params, 1, ea, eb);
  CHECK(pred.t.norm() == 0.0);
  CHECK(pred.q_raw == Eigen::Vector4d(1, 0, 0, 0));
  const RelativePose rel = pred.to_relative_pose();
  CHECK(rel.dt.norm() == 0.0);
  CHECK(angular_distance(rel.dq, UnitQuaternion{}) == 0.0);

  // Raw quaternion of zeros cannot be normalized.
  HeadPrediction degenerate;
  degenerate.t.setZero();
  degenerate.q_raw.setZero();
  CHECK_THROWS_AS(degenerate.to_relative_pose(), DegenerateQuaternion);

  // The unnormalized head output scales to the same rotation.
  HeadPrediction scaled;
  scaled.t = Eigen::Vector3d(1, 2, 3);
  scaled.q_raw = Eigen::Vector4d(0.2, 0.0, 0.2, 0.0);
  const RelativePose r2 = scaled.to_relative_pose();
  CHECK(r2.dq.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r2.dq.w == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));

  Eigen::VectorXd wrong(d1 + 1);
  wrong.setZero();
  CHECK_THROWS_AS(regress_relative_pose(params, 1, wrong, eb), ShapeMismatch);
  CHECK_THROWS_AS(regress_relative_pose(params, 0, ea, eb), DomainError);
  CHECK_THROWS_AS(regress_relative_pose(params, 5, ea, eb), DomainError);
}

TEST_CASE("pair head backward matches finite differences") {
  const EncoderConfig cfg = tiny_config();
  ModelParams params = init_model(cfg);
  const ParamLayout layout(cfg);

  std::mt19937_64 rng(29);
  const int d2 = cfg.block_dims[1];
  Eigen::MatrixXd ea = random_matrix(d2, 4, rng);
  Eigen::MatrixXd eb = random_matrix(d2, 4, rng);
  const auto& wblk = layout.head_weight(2);
  const auto& bblk = layout.head_bias(2);
  const Eigen::MatrixXd G = random_matrix(kHeadOutputs, 4, rng);

  const auto value = [&](const ModelParams& p, const Eigen::MatrixXd& a,
                         const Eigen::MatrixXd& b) {
    return (G.array() * pair_head_forward(p, wblk, bblk, a, b).array()).sum();
  };

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.total_size());
  Eigen::MatrixXd d_ea, d_eb;
  pair_head_backward(params, wblk, bblk, ea, eb, G, grad, d_ea, d_eb);

  const double h = 1e-6;
  // Parameter gradients (restricted to this head's blocks; others are zero).
  for (const auto* blk : {&wblk, &bblk}) {
    for (Eigen::Index i = 0; i < blk->size(); ++i) {
      const Eigen::Index idx = blk->offset + i;
      const double saved = params.values(idx);
      params.values(idx) = saved + h;
      const double up = value(params, ea, eb);
      params.values(idx) = saved - h;
      const double down = value(params, ea, eb);
      params.values(idx) = saved;
      CHECK(grad(idx) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
    }
  }
  CHECK(grad.segment(layout.stage_weight(1).offset, layout.stage_weight(1).size())
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // Embedding gradients.
  for (Eigen::Index c = 0; c < ea.cols(); ++c) {
    for (Eigen::Index r = 0; r < ea.rows(); ++r) {
      const double saved = ea(r, c);
      ea(r, c) = saved + h;
      const double up = value(params, ea, eb);
      ea(r, c) = saved - h;
      const double down = value(params, ea, eb);
      ea(r, c) = saved;
      CHECK(d_ea(r, c) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
    }
  }
  CHECK(d_eb.rows() == d2);
  CHECK(d_eb.cols() == 4);
}

TEST_CASE("checkpoints round trip through float32 and reject corruption") {
  const fs::path dir = make_temp_dir("ckpt");
  const EncoderConfig cfg = tiny_config();
  const ModelParams params = init_model(cfg);

  save_checkpoint(dir / "a.rfck", params);
  const ModelParams back = load_checkpoint(dir / "a.rfck");
  CHECK(back.config.input_dim == cfg.input_dim);
  CHECK(back.config.block_dims == cfg.block_dims);
  CHECK(back.config.seed == cfg.seed);
  REQUIRE(back.values.size() == params.values.size());
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    CHECK(back.values(i) == static_cast<double>(static_cast<float>(params.values(i))));
  }

  save_checkpoint(dir / "b.rfck", back);
  CHECK(read_bytes(dir / "a.rfck") == read_bytes(dir / "b.rfck"));

  const auto bytes = read_bytes(dir / "a.rfck");
  const auto write_variant = [&](const fs::path& p, std::vector<char> data) {
    std::ofstream out(p, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  };

  auto bad = bytes;
  bad[0] = 'Z';
  write_variant(dir / "magic.rfck", bad);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.rfck"), UnsupportedFormat);

  bad = bytes;
  bad[4] = 9;
  write_variant(dir / "ver.rfck", bad);
  CHECK_THROWS_AS(load_checkpoint(dir / "ver.rfck"), UnsupportedFormat);

  // Byte 36 sits in the stored config digest.
  bad = bytes;
  bad[36] = static_cast<char>(bad[36] ^ 0x01);
  write_variant(dir / "digest.rfck", bad);
  CHECK_THROWS_AS(load_checkpoint(dir / "digest.rfck"), ParseError);

  bad = bytes;
  bad.resize(bytes.size() - 3);
  write_variant(dir / "cut.rfck", bad);
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.rfck"), ParseError);

  CHECK_THROWS_AS(load_checkpoint(dir / "absent.rfck"), IoError);

  ModelParams mis = params;
  mis.values.resize(10);
  CHECK_THROWS_AS(save_checkpoint(dir / "bad.rfck", mis), ShapeMismatch);
}
