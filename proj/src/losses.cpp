#include "reloc/losses.hpp"

#include <algorithm>
#include <cmath>

#include "reloc/errors.hpp"

namespace reloc {

namespace {

const std::vector<std::pair<std::string, LossVariant>>& variant_table() {
  static const std::vector<std::pair<std::string, LossVariant>> table = {
      {"PL", {AuxTerm::kNone, false}},     {"PL+EA", {AuxTerm::kEA, false}},
      {"PL+EA+H", {AuxTerm::kEA, true}},   {"PL+EF", {AuxTerm::kEF, false}},
      {"PL+EF+H", {AuxTerm::kEF, true}},   {"PL+PA", {AuxTerm::kPA, false}},
      {"PL+PA+H", {AuxTerm::kPA, true}},   {"PL+PF", {AuxTerm::kPF, false}},
      {"PL+PF+H", {AuxTerm::kPF, true}},   {"PL+ATL", {AuxTerm::kATL, false}},
      {"PL+FTL", {AuxTerm::kFTL, false}},
  };
  return table;
}

}  // namespace

LossVariant parse_variant(const std::string& label) {
  for (const auto& [name, variant] : variant_table()) {
    if (name == label) {
      return variant;
    }
  }
  throw UnknownVariant("unknown loss variant '" + label + "'");
}

std::string variant_label(const LossVariant& variant) {
  for (const auto& [name, candidate] : variant_table()) {
    if (candidate.aux == variant.aux && candidate.homoscedastic == variant.homoscedastic) {
      return name;
    }
  }
  throw UnknownVariant("loss variant has no table label");
}

const std::vector<std::string>& all_variant_labels() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> out;
    for (const auto& [name, variant] : variant_table()) {
      (void)variant;
      out.push_back(name);
    }
    return out;
  }();
  return labels;
}

void LossConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw DomainError("beta must be finite and > 0");
  }
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw DomainError("margin must be finite and > 0");
  }
}

double pose_loss_layerwise(const std::vector<HeadPrediction>& preds,
                           const RelativePose& gt, double beta) {
  const Eigen::Vector4d q_gt(gt.dq.w, gt.dq.x, gt.dq.y, gt.dq.z);
  double loss = 0.0;
  for (const auto& pred : preds) {
    loss += (pred.t - gt.dt).cwiseAbs().sum();
    loss += beta * (pred.q_raw - q_gt).cwiseAbs().sum();
  }
  return loss;
}

double predict_frustum_loss(double d1_hat, double d2_hat, double d1, double d2) {
  return std::abs(d1_hat - d1) + std::abs(d2_hat - d2);
}

double enforce_frustum_loss(const Eigen::VectorXd& e_a, const Eigen::VectorXd& e_b,
                            double d1, double d2) {
  if (e_a.size() != e_b.size()) {
    throw ShapeMismatch("embeddings must have equal dimension");
  }
  const double gap = (e_a - e_b).norm();
  return std::abs(d1 - gap) + std::abs(d2 - gap);
}

double frustum_triplet_loss(const Eigen::VectorXd& e_anchor,
                            const Eigen::VectorXd& e_easy,
                            const Eigen::VectorXd& e_hard, double margin) {
  if (e_anchor.size() != e_easy.size() || e_anchor.size() != e_hard.size()) {
    throw ShapeMismatch("embeddings must have equal dimension");
  }
  return std::max(0.0, margin + (e_anchor - e_easy).norm() - (e_anchor - e_hard).norm());
}

double predict_angle_loss(double alpha_hat, double alpha) {
  return std::abs(alpha_hat - alpha);
}

double enforce_angle_loss(const Eigen::VectorXd& e_a, const Eigen::VectorXd& e_b,
                          double alpha) {
  if (e_a.size() != e_b.size()) {
    throw ShapeMismatch("embeddings must have equal dimension");
  }
  return std::abs(alpha - (e_a - e_b).norm());
}

double angle_triplet_loss(const Eigen::VectorXd& e_anchor,
                          const Eigen::VectorXd& e_easy,
                          const Eigen::VectorXd& e_medium, double margin) {
  if (e_anchor.size() != e_easy.size() || e_anchor.size() != e_medium.size()) {
    throw ShapeMismatch("embeddings must have equal dimension");
  }
  return std::max(0.0, margin + (e_anchor - e_easy).norm() - (e_anchor - e_medium).norm());
}

double combine_equal(double l_pose, double l_aux) {
  return l_pose + l_aux;
}

double combine_homoscedastic(double l_pose, double l_aux, double beta_hat,
                             double gamma_hat) {
  return l_pose * std::exp(-beta_hat) + beta_hat + l_aux * std::exp(-gamma_hat) +
         gamma_hat;
}

}  // namespace reloc
