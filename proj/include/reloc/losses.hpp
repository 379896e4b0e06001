#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "reloc/model.hpp"
#include "reloc/pose.hpp"

namespace reloc {

// Auxiliary term accompanying the pose loss. kNone is the plain "PL" row.
enum class AuxTerm { kNone, kPF, kEF, kFTL, kPA, kEA, kATL };

struct LossVariant {
  AuxTerm aux = AuxTerm::kNone;
  bool homoscedastic = false;
};

// Exact label set: PL, PL+EA, PL+EA+H, PL+EF, PL+EF+H, PL+PA, PL+PA+H,
// PL+PF, PL+PF+H, PL+ATL, PL+FTL (the triplet variants have no +H form).
// Throws UnknownVariant for anything else.
LossVariant parse_variant(const std::string& label);
std::string variant_label(const LossVariant& variant);
const std::vector<std::string>& all_variant_labels();

struct LossConfig {
  LossVariant variant;
  double beta = 1.0;      // quaternion weight inside the pose loss
  double margin = 0.2;    // triplet margin m
  bool dual_triplet = false;  // adds the medium-vs-hard hinge to FTL

  void validate() const;  // DomainError unless beta > 0 and margin > 0
};

// Sum over heads of |t_hat - t|_1 + beta * |q_hat - q|_1 on raw outputs.
// The ground-truth quaternion is used in canonical w >= 0 form; predictions
// are NOT normalized here.
double pose_loss_layerwise(const std::vector<HeadPrediction>& preds,
                           const RelativePose& gt, double beta);

double predict_frustum_loss(double d1_hat, double d2_hat, double d1, double d2);

double enforce_frustum_loss(const Eigen::VectorXd& e_a, const Eigen::VectorXd& e_b,
                            double d1, double d2);

double frustum_triplet_loss(const Eigen::VectorXd& e_anchor,
                            const Eigen::VectorXd& e_easy,
                            const Eigen::VectorXd& e_hard, double margin);

double predict_angle_loss(double alpha_hat, double alpha);

double enforce_angle_loss(const Eigen::VectorXd& e_a, const Eigen::VectorXd& e_b,
                          double alpha);

double angle_triplet_loss(const Eigen::VectorXd& e_anchor,
                          const Eigen::VectorXd& e_easy,
                          const Eigen::VectorXd& e_medium, double margin);

double combine_equal(double l_pose, double l_aux);

// l_pose / exp(beta_hat) + beta_hat + l_aux / exp(gamma_hat) + gamma_hat;
// may be negative through the +beta_hat +gamma_hat terms.
double combine_homoscedastic(double l_pose, double l_aux, double beta_hat,
                             double gamma_hat);

}  // namespace reloc
