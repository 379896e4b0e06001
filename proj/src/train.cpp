#include "reloc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "reloc/errors.hpp"
#include "reloc/parallel.hpp"
#include "reloc/rng.hpp"

namespace reloc {
namespace {

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Eigen::MatrixXd sign_matrix(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double v) { return sign_or_zero(v); });
}

}  // namespace

// --- optimizers ------------------------------------------------------------

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double lr) {
  if (grad.size() != params.size()) {
    throw ShapeMismatch("gradient size does not match parameter size");
  }
  if (state.m.size() == 0) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  }
  if (state.m.size() != params.size()) {
    throw ShapeMismatch("optimizer state size does not match parameter size");
  }
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  if (lr == 0.0) return;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -=
      lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + state.epsilon);
}

void sgd_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, SgdState& state,
              double lr) {
  if (grad.size() != params.size()) {
    throw ShapeMismatch("gradient size does not match parameter size");
  }
  if (state.velocity.size() == 0) {
    state.velocity = Eigen::VectorXd::Zero(params.size());
  }
  if (state.velocity.size() != params.size()) {
    throw ShapeMismatch("optimizer state size does not match parameter size");
  }
  state.velocity = state.momentum * state.velocity + grad;
  if (lr == 0.0) return;
  params.noalias() -= lr * state.velocity;
}

// --- schedules ---------------------------------------------------------------

void TrainSchedule::validate() const {
  if (epochs < 1) throw DomainError("epochs must be >= 1");
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("learning_rate must be finite and >= 0");
  }
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) {
    throw DomainError("sgd_momentum must be in [0, 1)");
  }
  if (max_samples_per_epoch < 0) {
    throw DomainError("max_samples_per_epoch must be >= 0");
  }
}

TrainSchedule desk_pretrain_schedule(std::uint64_t seed) {
  TrainSchedule s;
  s.phase = TrainPhase::kPretrain;
  s.epochs = 50;
  s.optimizer = OptimizerKind::kAdam;
  // Desk corpora are small (a few thousand near-field pairs), so the recipe
  // trades the full-scale settings for many small annealed steps: L1 medians
  // need the fine late-epoch steps, and tiny batches are what give 50 epochs
  // enough optimizer steps to converge the regression heads.
  s.learning_rate = 2e-3;
  s.batch_size = 2;
  s.seed = seed;
  s.max_samples_per_epoch = 4096;
  return s;
}

TrainSchedule desk_finetune_schedule(std::uint64_t seed) {
  TrainSchedule s;
  s.phase = TrainPhase::kFinetune;
  s.epochs = 20;
  s.optimizer = OptimizerKind::kSgd;
  // Distillation at desk scale is a polish pass over a head that pretraining
  // already converged; a gentle rate keeps the auxiliary objective from
  // dragging the regression head off its optimum.
  s.learning_rate = 1e-5;
  s.batch_size = 128;
  s.seed = seed;
  s.max_samples_per_epoch = 0;
  return s;
}

TrainSchedule full_pretrain_schedule(std::uint64_t seed) {
  TrainSchedule s = desk_pretrain_schedule(seed);
  s.epochs = 300;
  s.learning_rate = 1e-4;
  s.batch_size = 128;
  s.max_samples_per_epoch = 0;
  return s;
}

TrainSchedule full_finetune_schedule(std::uint64_t seed) {
  TrainSchedule s = desk_finetune_schedule(seed);
  s.epochs = 75;
  s.learning_rate = 1e-4;
  return s;
}

// --- training samples ----------------------------------------------------------

std::vector<PosePairSample> build_pair_samples(const Scene& scene,
                                               const std::vector<OverlapPair>& pairs) {
  std::vector<PosePairSample> samples;
  samples.reserve(pairs.size());
  for (const OverlapPair& pair : pairs) {
    const Frame& db = scene.frame(pair.db);
    const Frame& query = scene.frame(pair.query);
    PosePairSample s;
    s.input_db = db.features;
    s.input_q = query.features;
    const RelativePose rel = relative_pose(db.pose, query.pose);
    s.dt = rel.dt;
    s.dq = rel.dq.coeffs_wxyz();
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<QuadrupletSample> build_quadruplet_samples(
    const Scene& scene, const std::vector<Quadruplet>& quadruplets) {
  std::vector<QuadrupletSample> samples;
  samples.reserve(quadruplets.size());
  for (const Quadruplet& q : quadruplets) {
    const Frame& anchor = scene.frame(q.anchor);
    const Frame& easy = scene.frame(q.easy);
    const Frame& medium = scene.frame(q.medium);
    const Frame& hard = scene.frame(q.hard);
    QuadrupletSample s;
    s.anchor = anchor.features;
    s.easy = easy.features;
    s.medium = medium.features;
    s.hard = hard.features;
    const RelativePose rel = relative_pose(anchor.pose, easy.pose);
    s.dt_easy = rel.dt;
    s.dq_easy = rel.dq.coeffs_wxyz();
    s.easy_stats = q.easy_stats;
    s.medium_stats = q.medium_stats;
    s.hard_stats = q.hard_stats;
    samples.push_back(std::move(s));
  }
  return samples;
}

// --- batch objectives ------------------------------------------------------------

namespace {

Eigen::MatrixXd gather_inputs(const std::vector<PosePairSample>& batch, bool db_side,
                              Eigen::Index input_dim) {
  Eigen::MatrixXd x(input_dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd& v = db_side ? batch[i].input_db : batch[i].input_q;
    if (v.size() != input_dim) {
      throw ShapeMismatch("sample feature length does not match model input_dim");
    }
    x.col(static_cast<Eigen::Index>(i)) = v;
  }
  return x;
}

// L1 pose residual for one head: returns the summed loss contribution and,
// when wanted, the upstream gradient dL/dY already scaled by the caller's
// per-element weights (w_t on translation rows, w_q on quaternion rows).
double pose_head_residual(const Eigen::MatrixXd& y, const Eigen::MatrixXd& t_target,
                          const Eigen::MatrixXd& q_target, double beta, double w_t,
                          double w_q, Eigen::MatrixXd* d_y) {
  Eigen::MatrixXd r = y;
  r.topRows(3) -= t_target;
  r.bottomRows(4) -= q_target;
  const double loss =
      r.topRows(3).cwiseAbs().sum() + beta * r.bottomRows(4).cwiseAbs().sum();
  if (d_y != nullptr) {
    *d_y = sign_matrix(r);
    d_y->topRows(3) *= w_t;
    d_y->bottomRows(4) *= w_q;
  }
  return loss;
}

}  // namespace

double pretrain_loss_and_gradient(const ModelParams& params,
                                  const std::vector<PosePairSample>& batch, double beta,
                                  Eigen::VectorXd* grad) {
  if (batch.empty()) throw DomainError("batch must contain at least one sample");
  if (!(beta > 0.0)) throw DomainError("beta must be > 0");
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index input_dim = params.config.input_dim;

  Eigen::MatrixXd t_target(3, b);
  Eigen::MatrixXd q_target(4, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    t_target.col(i) = batch[static_cast<std::size_t>(i)].dt;
    q_target.col(i) = batch[static_cast<std::size_t>(i)].dq;
  }

  const EncodeTrace trace_db =
      encode_batch(params, gather_inputs(batch, true, input_dim), kNumStages);
  const EncodeTrace trace_q =
      encode_batch(params, gather_inputs(batch, false, input_dim), kNumStages);

  const ParamLayout layout = params.layout();
  const double inv_b = 1.0 / static_cast<double>(b);
  std::array<Eigen::MatrixXd, kNumStages> d_db;
  std::array<Eigen::MatrixXd, kNumStages> d_q;

  double loss_sum = 0.0;
  for (int stage = 1; stage <= kNumStages; ++stage) {
    const Eigen::MatrixXd& e_db = trace_db.act[static_cast<std::size_t>(stage - 1)];
    const Eigen::MatrixXd& e_q = trace_q.act[static_cast<std::size_t>(stage - 1)];
    const Eigen::MatrixXd y = pair_head_forward(params, layout.head_weight(stage),
                                                layout.head_bias(stage), e_db, e_q);
    Eigen::MatrixXd d_y;
    loss_sum += pose_head_residual(y, t_target, q_target, beta, inv_b, beta * inv_b,
                                   grad != nullptr ? &d_y : nullptr);
    if (grad != nullptr) {
      pair_head_backward(params, layout.head_weight(stage), layout.head_bias(stage),
                         e_db, e_q, d_y, *grad, d_db[static_cast<std::size_t>(stage - 1)],
                         d_q[static_cast<std::size_t>(stage - 1)]);
    }
  }
  if (grad != nullptr) {
    encode_backward(params, trace_db, d_db, *grad);
    encode_backward(params, trace_q, d_q, *grad);
  }
  return loss_sum * inv_b;
}

namespace {

// Shared state for the distilled objective: stage-1 embeddings of the four
// quadruplet roles and their gradient accumulators.
struct TierBatch {
  Eigen::MatrixXd t_target;  // 3 x B
  Eigen::MatrixXd q_target;  // 4 x B
  EncodeTrace anchor, easy, medium, hard;
  Eigen::MatrixXd d_anchor, d_easy, d_medium, d_hard;
};

// |target - d_hat| terms for the frustum/angle prediction heads over one
// tier; `targets` has one row per head output.
double head_tier_loss(const ModelParams& params, const ParamLayout::Block& weight,
                      const ParamLayout::Block& bias, const Eigen::MatrixXd& e_a,
                      const Eigen::MatrixXd& e_x, const Eigen::MatrixXd& targets,
                      double d_scale, Eigen::VectorXd* grad, Eigen::MatrixXd& d_e_a,
                      Eigen::MatrixXd& d_e_x) {
  const Eigen::MatrixXd y = pair_head_forward(params, weight, bias, e_a, e_x);
  const Eigen::MatrixXd r = y - targets;
  if (grad != nullptr) {
    const Eigen::MatrixXd d_y = sign_matrix(r) * d_scale;
    pair_head_backward(params, weight, bias, e_a, e_x, d_y, *grad, d_e_a, d_e_x);
  }
  return r.cwiseAbs().sum();
}

// |target - ||e_a - e_x||| terms (embedding-energy losses) over one tier;
// each target row is matched against the same pair norm.
double energy_tier_loss(const Eigen::MatrixXd& e_a, const Eigen::MatrixXd& e_x,
                        const Eigen::MatrixXd& targets, double d_scale,
                        Eigen::MatrixXd* d_e_a, Eigen::MatrixXd* d_e_x) {
  const Eigen::Index b = e_a.cols();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::VectorXd diff = e_a.col(i) - e_x.col(i);
    const double n = diff.norm();
    double dn = 0.0;
    for (Eigen::Index r = 0; r < targets.rows(); ++r) {
      const double res = targets(r, i) - n;
      loss += std::abs(res);
      dn -= sign_or_zero(res);
    }
    if (d_e_a != nullptr && n > 0.0 && dn != 0.0) {
      const Eigen::VectorXd g = (dn * d_scale / n) * diff;
      d_e_a->col(i) += g;
      d_e_x->col(i) -= g;
    }
  }
  return loss;
}

// Hinge max(0, margin + ||a-p|| - ||a-n||) summed over the batch.
double triplet_tier_loss(const Eigen::MatrixXd& e_a, const Eigen::MatrixXd& e_p,
                         const Eigen::MatrixXd& e_n, double margin, double d_scale,
                         Eigen::MatrixXd* d_e_a, Eigen::MatrixXd* d_e_p,
                         Eigen::MatrixXd* d_e_n) {
  const Eigen::Index b = e_a.cols();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::VectorXd diff_p = e_a.col(i) - e_p.col(i);
    const Eigen::VectorXd diff_n = e_a.col(i) - e_n.col(i);
    const double np = diff_p.norm();
    const double nn = diff_n.norm();
    const double hinge = margin + np - nn;
    if (hinge <= 0.0) continue;
    loss += hinge;
    if (d_e_a == nullptr) continue;
    if (np > 0.0) {
      const Eigen::VectorXd gp = (d_scale / np) * diff_p;
      d_e_a->col(i) += gp;
      d_e_p->col(i) -= gp;
    }
    if (nn > 0.0) {
      const Eigen::VectorXd gn = (d_scale / nn) * diff_n;
      d_e_a->col(i) -= gn;
      d_e_n->col(i) += gn;
    }
  }
  return loss;
}

}  // namespace

double finetune_loss_and_gradient(const ModelParams& params,
                                  const std::vector<QuadrupletSample>& batch,
                                  const LossConfig& loss, Eigen::VectorXd* grad) {
  if (batch.empty()) throw DomainError("batch must contain at least one sample");
  loss.validate();
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index input_dim = params.config.input_dim;
  const bool want_grad = grad != nullptr;

  Eigen::MatrixXd xa(input_dim, b), xe(input_dim, b), xm(input_dim, b),
      xh(input_dim, b);
  TierBatch tb;
  tb.t_target.resize(3, b);
  tb.q_target.resize(4, b);
  // Per-tier frustum-distance and angle targets, one column per sample.
  Eigen::MatrixXd frustum_easy(2, b), frustum_medium(2, b), frustum_hard(2, b);
  Eigen::MatrixXd alpha_easy(1, b), alpha_medium(1, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const QuadrupletSample& s = batch[static_cast<std::size_t>(i)];
    if (s.anchor.size() != input_dim || s.easy.size() != input_dim ||
        s.medium.size() != input_dim || s.hard.size() != input_dim) {
      throw ShapeMismatch("sample feature length does not match model input_dim");
    }
    xa.col(i) = s.anchor;
    xe.col(i) = s.easy;
    xm.col(i) = s.medium;
    xh.col(i) = s.hard;
    tb.t_target.col(i) = s.dt_easy;
    tb.q_target.col(i) = s.dq_easy;
    frustum_easy.col(i) = Eigen::Vector2d(s.easy_stats.d1, s.easy_stats.d2);
    frustum_medium.col(i) = Eigen::Vector2d(s.medium_stats.d1, s.medium_stats.d2);
    frustum_hard.col(i) = Eigen::Vector2d(s.hard_stats.d1, s.hard_stats.d2);
    alpha_easy(0, i) = s.easy_stats.alpha;
    alpha_medium(0, i) = s.medium_stats.alpha;
  }

  tb.anchor = encode_batch(params, xa, 1);
  tb.easy = encode_batch(params, xe, 1);
  tb.medium = encode_batch(params, xm, 1);
  tb.hard = encode_batch(params, xh, 1);
  const Eigen::MatrixXd& ea = tb.anchor.act[0];
  const Eigen::MatrixXd& ee = tb.easy.act[0];
  const Eigen::MatrixXd& em = tb.medium.act[0];
  const Eigen::MatrixXd& eh = tb.hard.act[0];
  if (want_grad) {
    tb.d_anchor.setZero(ea.rows(), b);
    tb.d_easy.setZero(ea.rows(), b);
    tb.d_medium.setZero(ea.rows(), b);
    tb.d_hard.setZero(ea.rows(), b);
  }

  const ParamLayout layout = params.layout();
  const double inv_b = 1.0 / static_cast<double>(b);
  const bool homo = loss.variant.homoscedastic;
  const double w_pose = homo ? std::exp(-params.beta_hat()) : 1.0;
  const double w_aux = homo ? std::exp(-params.gamma_hat()) : 1.0;

  // Pose term: head 1 on (anchor, easy).
  const Eigen::MatrixXd y_pose = pair_head_forward(params, layout.head_weight(1),
                                                   layout.head_bias(1), ea, ee);
  Eigen::MatrixXd d_y_pose;
  const double l_pose =
      pose_head_residual(y_pose, tb.t_target, tb.q_target, loss.beta, w_pose * inv_b,
                         loss.beta * w_pose * inv_b, want_grad ? &d_y_pose : nullptr) *
      inv_b;
  if (want_grad) {
    pair_head_backward(params, layout.head_weight(1), layout.head_bias(1), ea, ee,
                       d_y_pose, *grad, tb.d_anchor, tb.d_easy);
  }

  // Auxiliary term, routed to its difficulty tiers and averaged over all
  // routed items.
  double l_aux = 0.0;
  switch (loss.variant.aux) {
    case AuxTerm::kNone:
      break;
    case AuxTerm::kPF: {
      const double scale = w_aux * inv_b / 3.0;
      double sum = 0.0;
      sum += head_tier_loss(params, layout.frustum_weight(), layout.frustum_bias(), ea,
                            ee, frustum_easy, scale, want_grad ? grad : nullptr,
                            tb.d_anchor, tb.d_easy);
      sum += head_tier_loss(params, layout.frustum_weight(), layout.frustum_bias(), ea,
                            em, frustum_medium, scale, want_grad ? grad : nullptr,
                            tb.d_anchor, tb.d_medium);
      sum += head_tier_loss(params, layout.frustum_weight(), layout.frustum_bias(), ea,
                            eh, frustum_hard, scale, want_grad ? grad : nullptr,
                            tb.d_anchor, tb.d_hard);
      l_aux = sum * inv_b / 3.0;
      break;
    }
    case AuxTerm::kPA: {
      const double scale = w_aux * inv_b / 2.0;
      double sum = 0.0;
      sum += head_tier_loss(params, layout.angle_weight(), layout.angle_bias(), ea, ee,
                            alpha_easy, scale, want_grad ? grad : nullptr, tb.d_anchor,
                            tb.d_easy);
      sum += head_tier_loss(params, layout.angle_weight(), layout.angle_bias(), ea, em,
                            alpha_medium, scale, want_grad ? grad : nullptr,
                            tb.d_anchor, tb.d_medium);
      l_aux = sum * inv_b / 2.0;
      break;
    }
    case AuxTerm::kEF: {
      const double scale = w_aux * inv_b / 3.0;
      double sum = 0.0;
      sum += energy_tier_loss(ea, ee, frustum_easy, scale,
                              want_grad ? &tb.d_anchor : nullptr, &tb.d_easy);
      sum += energy_tier_loss(ea, em, frustum_medium, scale,
                              want_grad ? &tb.d_anchor : nullptr, &tb.d_medium);
      sum += energy_tier_loss(ea, eh, frustum_hard, scale,
                              want_grad ? &tb.d_anchor : nullptr, &tb.d_hard);
      l_aux = sum * inv_b / 3.0;
      break;
    }
    case AuxTerm::kEA: {
      const double scale = w_aux * inv_b / 2.0;
      double sum = 0.0;
      sum += energy_tier_loss(ea, ee, alpha_easy, scale,
                              want_grad ? &tb.d_anchor : nullptr, &tb.d_easy);
      sum += energy_tier_loss(ea, em, alpha_medium, scale,
                              want_grad ? &tb.d_anchor : nullptr, &tb.d_medium);
      l_aux = sum * inv_b / 2.0;
      break;
    }
    case AuxTerm::kATL: {
      const double sum = triplet_tier_loss(
          ea, ee, em, loss.margin, w_aux * inv_b, want_grad ? &tb.d_anchor : nullptr,
          &tb.d_easy, &tb.d_medium);
      l_aux = sum * inv_b;
      break;
    }
    case AuxTerm::kFTL: {
      double sum = triplet_tier_loss(ea, ee, eh, loss.margin, w_aux * inv_b,
                                     want_grad ? &tb.d_anchor : nullptr, &tb.d_easy,
                                     &tb.d_hard);
      if (loss.dual_triplet) {
        sum += triplet_tier_loss(ea, em, eh, loss.margin, w_aux * inv_b,
                                 want_grad ? &tb.d_anchor : nullptr, &tb.d_medium,
                                 &tb.d_hard);
      }
      l_aux = sum * inv_b;
      break;
    }
  }

  double total;
  if (homo) {
    total = combine_homoscedastic(l_pose, l_aux, params.beta_hat(), params.gamma_hat());
  } else {
    total = combine_equal(l_pose, l_aux);
  }

  if (want_grad) {
    std::array<Eigen::MatrixXd, kNumStages> grads_a, grads_e, grads_m, grads_h;
    grads_a[0] = std::move(tb.d_anchor);
    grads_e[0] = std::move(tb.d_easy);
    grads_m[0] = std::move(tb.d_medium);
    grads_h[0] = std::move(tb.d_hard);
    encode_backward(params, tb.anchor, grads_a, *grad);
    encode_backward(params, tb.easy, grads_e, *grad);
    encode_backward(params, tb.medium, grads_m, *grad);
    encode_backward(params, tb.hard, grads_h, *grad);
    if (homo) {
      (*grad)(layout.beta_hat()) += 1.0 - l_pose * w_pose;
      (*grad)(layout.gamma_hat()) += 1.0 - l_aux * w_aux;
    }
  }
  return total;
}

// --- training loops ----------------------------------------------------------------

namespace {

constexpr double kPi = 3.14159265358979323846;

template <typename Sample, typename Objective>
TrainResult run_training(const ModelParams& init, const std::vector<Sample>& samples,
                         const TrainSchedule& schedule, Objective&& objective) {
  schedule.validate();
  if (samples.empty()) throw DomainError("training requires at least one sample");

  TrainResult result;
  result.params = init;
  const Eigen::Index n = result.params.values.size();

  AdamState adam;
  SgdState sgd;
  sgd.momentum = schedule.sgd_momentum;

  std::mt19937_64 rng(splitmix64(schedule.seed));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::VectorXd grad(n);

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    // schedule.learning_rate is the initial rate; anneal it with a cosine
    // taper so early epochs cover the distance to a solution while late
    // epochs shrink the step noise the L1 sign gradients would otherwise
    // keep injecting. The first epoch always runs at the full rate and the
    // rate never reaches zero.
    const double lr = schedule.learning_rate * 0.5 *
                      (1.0 + std::cos(kPi * static_cast<double>(epoch) /
                                      static_cast<double>(schedule.epochs)));
    shuffle_in_place(order, rng);
    std::size_t limit = samples.size();
    if (schedule.max_samples_per_epoch > 0) {
      limit = std::min(limit, static_cast<std::size_t>(schedule.max_samples_per_epoch));
    }
    double loss_sum = 0.0;
    std::size_t counted = 0;
    const std::size_t bs = static_cast<std::size_t>(schedule.batch_size);
    for (std::size_t start = 0; start < limit; start += bs) {
      const std::size_t stop = std::min(limit, start + bs);
      std::vector<Sample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(samples[order[i]]);
      grad.setZero();
      const double loss = objective(result.params, batch, grad);
      loss_sum += loss * static_cast<double>(batch.size());
      counted += batch.size();
      if (schedule.optimizer == OptimizerKind::kAdam) {
        adam_step(result.params.values, grad, adam, lr);
      } else {
        sgd_step(result.params.values, grad, sgd, lr);
      }
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(counted));
  }
  return result;
}

}  // namespace

TrainResult pretrain(const ModelParams& init, const std::vector<PosePairSample>& samples,
                     const TrainSchedule& schedule, double beta) {
  if (schedule.phase != TrainPhase::kPretrain) {
    throw DomainError("schedule phase must be pretrain");
  }
  return run_training(init, samples, schedule,
                      [beta](const ModelParams& p, const std::vector<PosePairSample>& b,
                             Eigen::VectorXd& g) {
                        return pretrain_loss_and_gradient(p, b, beta, &g);
                      });
}

TrainResult finetune(const ModelParams& pretrained,
                     const std::vector<QuadrupletSample>& samples, const LossConfig& loss,
                     const TrainSchedule& schedule) {
  if (schedule.phase != TrainPhase::kFinetune) {
    throw DomainError("schedule phase must be finetune");
  }
  loss.validate();
  return run_training(pretrained, samples, schedule,
                      [&loss](const ModelParams& p,
                              const std::vector<QuadrupletSample>& b,
                              Eigen::VectorXd& g) {
                        return finetune_loss_and_gradient(p, b, loss, &g);
                      });
}

// --- localization / evaluation ------------------------------------------------------

Pose localize(const ModelParams& params, const EmbeddingIndex& index,
              const Eigen::VectorXd& query_features) {
  const EncodeTrace trace = encode_batch(params, query_features, 1);
  const Eigen::VectorXd e1 = trace.act[0].col(0);
  const auto neighbors = index.query_knn(e1, 1);
  const IndexEntry* top = neighbors.front().first;
  const HeadPrediction pred = regress_relative_pose(params, 1, top->embedding, e1);
  return compose_absolute(top->pose, pred.to_relative_pose());
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

EvalReport evaluate(const ModelParams& params, const EmbeddingIndex& index,
                    const Scene& scene, int threads) {
  const std::vector<const Frame*> queries = scene.query_frames();
  if (queries.empty()) throw DomainError("scene has no query frames");

  struct Slot {
    double rt = 0.0, rr = 0.0, pt = 0.0, pr = 0.0;
  };
  std::vector<Slot> slots(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const Frame& frame = *queries[i];
    const EncodeTrace trace = encode_batch(params, frame.features, 1);
    const Eigen::VectorXd e1 = trace.act[0].col(0);
    const auto [rt, rr] = index.retrieval_error(e1, frame.pose);
    const auto neighbors = index.query_knn(e1, 1);
    const IndexEntry* top = neighbors.front().first;
    const HeadPrediction pred = regress_relative_pose(params, 1, top->embedding, e1);
    const Pose composed = compose_absolute(top->pose, pred.to_relative_pose());
    slots[i] = {rt, rr, (composed.t - frame.pose.t).norm(),
                rotation_error_degrees(composed.q, frame.pose.q)};
  });

  std::vector<double> rt, rr, pt, pr;
  rt.reserve(slots.size());
  rr.reserve(slots.size());
  pt.reserve(slots.size());
  pr.reserve(slots.size());
  for (const Slot& s : slots) {
    rt.push_back(s.rt);
    rr.push_back(s.rr);
    pt.push_back(s.pt);
    pr.push_back(s.pr);
  }

  SceneEvalRow row;
  row.scene = scene.manifest.scene_name;
  row.query_count = static_cast<int>(queries.size());
  row.retrieval_t_median = median(rt);
  row.retrieval_r_median = median(rr);
  row.pipeline_t_median = median(pt);
  row.pipeline_r_median = median(pr);
  return make_report({row});
}

EvalReport make_report(std::vector<SceneEvalRow> scenes) {
  if (scenes.empty()) throw DomainError("report requires at least one scene row");
  EvalReport report;
  SceneEvalRow avg;
  avg.scene = "Average";
  for (const SceneEvalRow& row : scenes) {
    avg.query_count += row.query_count;
    avg.retrieval_t_median += row.retrieval_t_median;
    avg.retrieval_r_median += row.retrieval_r_median;
    avg.pipeline_t_median += row.pipeline_t_median;
    avg.pipeline_r_median += row.pipeline_r_median;
  }
  const double inv = 1.0 / static_cast<double>(scenes.size());
  avg.retrieval_t_median *= inv;
  avg.retrieval_r_median *= inv;
  avg.pipeline_t_median *= inv;
  avg.pipeline_r_median *= inv;
  report.scenes = std::move(scenes);
  report.average = avg;
  return report;
}

std::string render_report_text(const EvalReport& report) {
  std::ostringstream out;
  out << "Median localization error per scene\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s %8s %14s %16s %13s %15s\n", "Scene",
                "Queries", "Retrieval [m]", "Retrieval [deg]", "Pipeline [m]",
                "Pipeline [deg]");
  out << line;
  const auto emit = [&](const SceneEvalRow& row) {
    std::snprintf(line, sizeof(line), "%-20s %8d %14.4f %16.3f %13.4f %15.3f\n",
                  row.scene.c_str(), row.query_count, row.retrieval_t_median,
                  row.retrieval_r_median, row.pipeline_t_median, row.pipeline_r_median);
    out << line;
  };
  for (const SceneEvalRow& row : report.scenes) emit(row);
  emit(report.average);
  std::snprintf(line, sizeof(line), "%-20s %8s %14.4f %16.3f %13.4f %15.3f\n",
                "NN-Net (reference)", "-", kNnNetRetrievalT, kNnNetRetrievalR,
                kNnNetPipelineT, kNnNetPipelineR);
  out << line;
  return out.str();
}

std::string render_report_json(const EvalReport& report) {
  using json = nlohmann::ordered_json;
  const auto row_json = [](const SceneEvalRow& row) {
    return json{{"scene", row.scene},
                {"queries", row.query_count},
                {"retrieval_t_median_m", row.retrieval_t_median},
                {"retrieval_r_median_deg", row.retrieval_r_median},
                {"pipeline_t_median_m", row.pipeline_t_median},
                {"pipeline_r_median_deg", row.pipeline_r_median}};
  };
  json j;
  j["scenes"] = json::array();
  for (const SceneEvalRow& row : report.scenes) j["scenes"].push_back(row_json(row));
  j["average"] = row_json(report.average);
  j["reference"] = {{"name", "NN-Net"},
                    {"retrieval_t_median_m", kNnNetRetrievalT},
                    {"retrieval_r_median_deg", kNnNetRetrievalR},
                    {"pipeline_t_median_m", kNnNetPipelineT},
                    {"pipeline_r_median_deg", kNnNetPipelineR}};
  return j.dump(2) + "\n";
}

}  // namespace reloc
