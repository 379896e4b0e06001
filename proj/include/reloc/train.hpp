#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reloc/dataset.hpp"
#include "reloc/index.hpp"
#include "reloc/losses.hpp"
#include "reloc/mining.hpp"
#include "reloc/model.hpp"

namespace reloc {

// --- optimizers ------------------------------------------------------------

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. A fresh state on the first step gives an update of
// magnitude ~lr per coordinate with nonzero gradient, and coordinates whose
// gradient stays exactly zero are never moved.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double lr);

struct SgdState {
  Eigen::VectorXd velocity;
  double momentum = 0.0;  // 0 = plain SGD
};

void sgd_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, SgdState& state,
              double lr);

// --- schedules ---------------------------------------------------------------

enum class TrainPhase { kPretrain, kFinetune };
enum class OptimizerKind { kAdam, kSgd };

struct TrainSchedule {
  TrainPhase phase = TrainPhase::kPretrain;
  int epochs = 50;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  // Initial rate; the training loop cosine-anneals it across epochs (the
  // first epoch runs at this value, later epochs taper toward zero).
  double learning_rate = 1e-4;
  int batch_size = 128;
  std::uint64_t seed = 1;
  double sgd_momentum = 0.0;
  // 0 trains on every sample each epoch; otherwise each epoch draws this
  // many samples from the seeded shuffle (keeps desk runs bounded).
  int max_samples_per_epoch = 0;

  // epochs >= 1, batch >= 1, lr >= 0 (0 is the documented no-op edge).
  void validate() const;
};

// Desk presets keep acceptance runs in the minutes range; the full-scale
// presets match the published schedule (300-epoch Adam pretrain, 75-epoch
// SGD fine-tune, lr 1e-4, batch 128).
TrainSchedule desk_pretrain_schedule(std::uint64_t seed = 1);
TrainSchedule desk_finetune_schedule(std::uint64_t seed = 1);
TrainSchedule full_pretrain_schedule(std::uint64_t seed = 1);
TrainSchedule full_finetune_schedule(std::uint64_t seed = 1);

// --- training samples ----------------------------------------------------------

struct PosePairSample {
  Eigen::VectorXd input_db;
  Eigen::VectorXd input_q;
  Eigen::Vector3d dt;   // query.t - db.t
  Eigen::Vector4d dq;   // relative quaternion, canonical w >= 0
};

std::vector<PosePairSample> build_pair_samples(const Scene& scene,
                                               const std::vector<OverlapPair>& pairs);

struct QuadrupletSample {
  Eigen::VectorXd anchor;
  Eigen::VectorXd easy;
  Eigen::VectorXd medium;
  Eigen::VectorXd hard;
  Eigen::Vector3d dt_easy;  // relative pose anchor -> easy
  Eigen::Vector4d dq_easy;
  PairStats easy_stats;
  PairStats medium_stats;
  PairStats hard_stats;
};

std::vector<QuadrupletSample> build_quadruplet_samples(
    const Scene& scene, const std::vector<Quadruplet>& quadruplets);

// --- batch objectives ------------------------------------------------------------

// Mean over the batch of the four-head pose loss. When grad is non-null the
// exact parameter gradient is accumulated into it (caller zeroes).
double pretrain_loss_and_gradient(const ModelParams& params,
                                  const std::vector<PosePairSample>& batch, double beta,
                                  Eigen::VectorXd* grad);

// Distilled objective: stage-1 embeddings only, pose head 1 on (anchor,
// easy), the auxiliary term routed to its difficulty tiers (PF/EF: easy +
// medium + hard; PA/EA: easy + medium; ATL: easy vs medium; FTL: easy vs
// hard), combined per the variant. Gradients touch only stage-1, head-1,
// auxiliary-head and homoscedastic parameters.
double finetune_loss_and_gradient(const ModelParams& params,
                                  const std::vector<QuadrupletSample>& batch,
                                  const LossConfig& loss, Eigen::VectorXd* grad);

// --- training loops ----------------------------------------------------------------

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_losses;  // per-epoch mean sample loss
};

TrainResult pretrain(const ModelParams& init, const std::vector<PosePairSample>& samples,
                     const TrainSchedule& schedule, double beta);

TrainResult finetune(const ModelParams& pretrained,
                     const std::vector<QuadrupletSample>& samples, const LossConfig& loss,
                     const TrainSchedule& schedule);

// --- localization / evaluation ------------------------------------------------------

// Encode the query, take the top-1 neighbor, regress the relative pose with
// head 1 on (neighbor embedding, query embedding) and compose it onto the
// neighbor's absolute pose.
Pose localize(const ModelParams& params, const EmbeddingIndex& index,
              const Eigen::VectorXd& query_features);

// Even-length median = mean of the two middle values. Throws DomainError on
// an empty list.
double median(std::vector<double> values);

struct SceneEvalRow {
  std::string scene;
  int query_count = 0;
  double retrieval_t_median = 0.0;  // meters
  double retrieval_r_median = 0.0;  // degrees
  double pipeline_t_median = 0.0;
  double pipeline_r_median = 0.0;
};

struct EvalReport {
  std::vector<SceneEvalRow> scenes;
  SceneEvalRow average;  // unweighted mean of the per-scene medians
};

// Published real-data baseline rendered alongside measured numbers for
// context (its retrieval-only and end-to-end average medians).
inline constexpr double kNnNetRetrievalT = 0.33;
inline constexpr double kNnNetRetrievalR = 14.83;
inline constexpr double kNnNetPipelineT = 0.21;
inline constexpr double kNnNetPipelineR = 9.30;

EvalReport evaluate(const ModelParams& params, const EmbeddingIndex& index,
                    const Scene& scene, int threads = 1);

EvalReport make_report(std::vector<SceneEvalRow> scenes);

std::string render_report_text(const EvalReport& report);
std::string render_report_json(const EvalReport& report);

}  // namespace reloc
