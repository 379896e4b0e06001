#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "reloc/dataset.hpp"

namespace reloc {

// Difficulty thresholds on min(theta1, theta2) and angular distance alpha.
inline constexpr double kEasyMinOverlap = 0.40;
inline constexpr double kEasyMaxAlpha = 0.30;
inline constexpr double kMediumMinOverlap = 0.30;
inline constexpr double kMediumMinAlpha = 0.60;
inline constexpr double kHardMinOverlap = 0.05;
inline constexpr double kHardMaxOverlap = 0.25;

enum class PairLabel { kEasy, kMedium, kHard, kUnusable };

// Labels are tested in fixed order Easy -> Medium -> Hard, which makes the
// regions disjoint even where the raw ranges overlap.
// Throws DomainError when either input is outside [0, 1].
PairLabel classify_pair(double overlap_min, double alpha);

struct PairStats {
  double d1 = 1.0;     // 1 - theta(a->b)
  double d2 = 1.0;     // 1 - theta(b->a)
  double alpha = 0.0;  // normalized angular distance

  double min_overlap() const { return 1.0 - (d1 > d2 ? d1 : d2); }
};

// Bilateral frustum distances plus angular distance for one frame pair.
PairStats compute_pair_stats(const Frame& a, const Frame& b, int stride);

struct Quadruplet {
  std::string anchor;
  std::string easy;
  std::string medium;
  std::string hard;
  PairStats easy_stats;
  PairStats medium_stats;
  PairStats hard_stats;
};

struct MiningConfig {
  int stride = 4;         // depth subsampling for overlap counts
  int per_anchor_cap = 1; // max quadruplets emitted per anchor
  int threads = 1;
};

// For each anchor (frames taken in id order) scans the other frames in id
// order and pairs the anchor with the first candidates of each label; an
// anchor missing any label emits nothing. Output is sorted by anchor id and
// deterministic for a fixed config regardless of thread count.
std::vector<Quadruplet> mine_quadruplets(const std::vector<Frame>& frames,
                                         const MiningConfig& config = {});
std::vector<Quadruplet> mine_quadruplets(const std::vector<const Frame*>& frames,
                                         const MiningConfig& config = {});

struct OverlapPair {
  std::string db;
  std::string query;
  double overlap = 0.0;  // min(theta1, theta2)
};

// All ordered pairs of distinct frames with min(theta1, theta2) >=
// min_overlap, in row-major id order. Throws DomainError unless
// min_overlap is in (0, 1].
std::vector<OverlapPair> mine_overlap_pairs(const std::vector<Frame>& frames,
                                            double min_overlap,
                                            const MiningConfig& config = {});
std::vector<OverlapPair> mine_overlap_pairs(const std::vector<const Frame*>& frames,
                                            double min_overlap,
                                            const MiningConfig& config = {});

// JSON-lines serialization. The first record is a header echoing the
// thresholds and mining parameters; one record per item follows.
void save_quadruplets(const std::filesystem::path& path,
                      const std::vector<Quadruplet>& quadruplets,
                      const MiningConfig& config);
std::vector<Quadruplet> load_quadruplets(const std::filesystem::path& path);

void save_overlap_pairs(const std::filesystem::path& path,
                        const std::vector<OverlapPair>& pairs,
                        double min_overlap, const MiningConfig& config);
std::vector<OverlapPair> load_overlap_pairs(const std::filesystem::path& path);

}  // namespace reloc
