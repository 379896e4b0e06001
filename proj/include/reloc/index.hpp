#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "reloc/pose.hpp"

namespace reloc {

struct IndexEntry {
  std::string frame_id;
  Eigen::VectorXd embedding;
  Pose pose;
};

// Exact brute-force nearest-neighbor store over database embeddings.
// Build-then-freeze lifecycle: inserts happen during construction, queries
// afterwards; queries never mutate state and are safe to run concurrently.
class EmbeddingIndex {
 public:
  explicit EmbeddingIndex(int dim = 64);

  int dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  // Throws DimensionMismatch on wrong embedding size, DuplicateId on a
  // repeated frame id, DomainError on non-finite components.
  void insert(IndexEntry entry);

  // The k nearest entries by Euclidean distance, ascending; ties broken by
  // lexicographic frame_id; k larger than the entry count returns all.
  // Comparisons use squared distances, reported distances take the root.
  // Throws EmptyIndex on an empty index, DomainError for k < 1.
  std::vector<std::pair<const IndexEntry*, double>> query_knn(
      const Eigen::VectorXd& query, int k = 1) const;

  // Translation (m) and rotation (deg) error between the ground-truth pose
  // and the top-1 neighbor's stored pose.
  std::pair<double, double> retrieval_error(const Eigen::VectorXd& query_embedding,
                                            const Pose& query_gt_pose) const;

  void save(const std::filesystem::path& path) const;
  static EmbeddingIndex load(const std::filesystem::path& path);

 private:
  int dim_;
  std::vector<IndexEntry> entries_;
};

}  // namespace reloc
