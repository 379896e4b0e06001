#include "reloc/mining.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "reloc/errors.hpp"
#include "reloc/parallel.hpp"

namespace reloc {

namespace {

using ordered_json = nlohmann::ordered_json;

// Frame indices sorted by id; mining iterates these so that the scan order
// is the documented one even if the caller shuffled the frame list.
std::vector<std::size_t> id_order(const std::vector<const Frame*>& frames) {
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frames[a]->id < frames[b]->id;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (frames[order[i - 1]]->id == frames[order[i]]->id) {
      throw DuplicateId("duplicate frame id: " + frames[order[i]]->id);
    }
  }
  return order;
}

std::vector<const Frame*> frame_pointers(const std::vector<Frame>& frames) {
  std::vector<const Frame*> out;
  out.reserve(frames.size());
  for (const Frame& f : frames) out.push_back(&f);
  return out;
}

ordered_json stats_to_json(const PairStats& s) {
  return ordered_json::array({s.d1, s.d2, s.alpha});
}

PairStats stats_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError("pair stats must be a [d1, d2, alpha] array");
  }
  PairStats s;
  s.d1 = j[0].get<double>();
  s.d2 = j[1].get<double>();
  s.alpha = j[2].get<double>();
  return s;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path,
                                       const std::string& expected_type) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::vector<nlohmann::json> records;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!saw_header) {
      if (!j.contains("type") || j["type"] != expected_type) {
        throw ParseError(path.string() + ": first record must be a '" + expected_type +
                         "' header");
      }
      saw_header = true;
      continue;
    }
    records.push_back(std::move(j));
  }
  if (!saw_header) {
    throw ParseError(path.string() + ": missing header record");
  }
  return records;
}

}  // namespace

PairLabel classify_pair(double overlap_min, double alpha) {
  if (!(overlap_min >= 0.0 && overlap_min <= 1.0) || !(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("classify_pair inputs must lie in [0, 1]");
  }
  if (overlap_min > kEasyMinOverlap && alpha < kEasyMaxAlpha) {
    return PairLabel::kEasy;
  }
  if (overlap_min > kMediumMinOverlap && alpha > kMediumMinAlpha) {
    return PairLabel::kMedium;
  }
  if (overlap_min > kHardMinOverlap && overlap_min < kHardMaxOverlap) {
    return PairLabel::kHard;
  }
  return PairLabel::kUnusable;
}

PairStats compute_pair_stats(const Frame& a, const Frame& b, int stride) {
  PairStats s;
  const FrustumDistances d =
      bilateral_frustum_distances(a.depth, a.pose, b.depth, b.pose, stride);
  s.d1 = d.d1;
  s.d2 = d.d2;
  s.alpha = angular_distance(a.pose.q, b.pose.q);
  return s;
}

std::vector<Quadruplet> mine_quadruplets(const std::vector<Frame>& frames,
                                         const MiningConfig& config) {
  return mine_quadruplets(frame_pointers(frames), config);
}

std::vector<Quadruplet> mine_quadruplets(const std::vector<const Frame*>& frames,
                                         const MiningConfig& config) {
  if (config.stride < 1 || config.per_anchor_cap < 1) {
    throw DomainError("mining stride and per-anchor cap must be >= 1");
  }
  const std::vector<std::size_t> order = id_order(frames);
  const std::size_t n = order.size();

  std::vector<std::vector<Quadruplet>> per_anchor(n);
  parallel_for(static_cast<std::int64_t>(n), config.threads, [&](std::int64_t ai) {
    const Frame& anchor = *frames[order[ai]];
    const std::size_t cap = static_cast<std::size_t>(config.per_anchor_cap);
    std::vector<std::pair<std::string, PairStats>> easy, medium, hard;
    for (std::size_t ci = 0; ci < n; ++ci) {
      if (ci == static_cast<std::size_t>(ai)) {
        continue;
      }
      if (easy.size() >= cap && medium.size() >= cap && hard.size() >= cap) {
        break;
      }
      const Frame& cand = *frames[order[ci]];
      const PairStats stats = compute_pair_stats(anchor, cand, config.stride);
      switch (classify_pair(stats.min_overlap(), stats.alpha)) {
        case PairLabel::kEasy:
          if (easy.size() < cap) easy.emplace_back(cand.id, stats);
          break;
        case PairLabel::kMedium:
          if (medium.size() < cap) medium.emplace_back(cand.id, stats);
          break;
        case PairLabel::kHard:
          if (hard.size() < cap) hard.emplace_back(cand.id, stats);
          break;
        case PairLabel::kUnusable:
          break;
      }
    }
    const std::size_t emit = std::min({easy.size(), medium.size(), hard.size()});
    for (std::size_t k = 0; k < emit; ++k) {
      Quadruplet q;
      q.anchor = anchor.id;
      q.easy = easy[k].first;
      q.easy_stats = easy[k].second;
      q.medium = medium[k].first;
      q.medium_stats = medium[k].second;
      q.hard = hard[k].first;
      q.hard_stats = hard[k].second;
      per_anchor[ai].push_back(std::move(q));
    }
  });

  std::vector<Quadruplet> out;
  for (auto& chunk : per_anchor) {
    for (auto& q : chunk) {
      out.push_back(std::move(q));
    }
  }
  return out;
}

std::vector<OverlapPair> mine_overlap_pairs(const std::vector<Frame>& frames,
                                            double min_overlap,
                                            const MiningConfig& config) {
  return mine_overlap_pairs(frame_pointers(frames), min_overlap, config);
}

std::vector<OverlapPair> mine_overlap_pairs(const std::vector<const Frame*>& frames,
                                            double min_overlap,
                                            const MiningConfig& config) {
  if (!(min_overlap > 0.0 && min_overlap <= 1.0)) {
    throw DomainError("min_overlap must lie in (0, 1]");
  }
  if (config.stride < 1) {
    throw DomainError("mining stride must be >= 1");
  }
  const std::vector<std::size_t> order = id_order(frames);
  const std::size_t n = order.size();

  // min-overlap is symmetric, so stats are computed once per unordered pair
  // (rows in parallel) and emitted for both directions.
  std::vector<std::vector<double>> overlap(n);
  parallel_for(static_cast<std::int64_t>(n), config.threads, [&](std::int64_t i) {
    overlap[i].assign(n - i, -1.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const PairStats s =
          compute_pair_stats(*frames[order[i]], *frames[order[j]], config.stride);
      overlap[i][j - i] = s.min_overlap();
    }
  });

  std::vector<OverlapPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        continue;
      }
      const double ov = i < j ? overlap[i][j - i] : overlap[j][i - j];
      if (ov >= min_overlap) {
        out.push_back(OverlapPair{frames[order[i]]->id, frames[order[j]]->id, ov});
      }
    }
  }
  return out;
}

void save_quadruplets(const std::filesystem::path& path,
                      const std::vector<Quadruplet>& quadruplets,
                      const MiningConfig& config) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  ordered_json header;
  header["type"] = "quadruplets";
  header["easy_min_overlap"] = kEasyMinOverlap;
  header["easy_max_alpha"] = kEasyMaxAlpha;
  header["medium_min_overlap"] = kMediumMinOverlap;
  header["medium_min_alpha"] = kMediumMinAlpha;
  header["hard_min_overlap"] = kHardMinOverlap;
  header["hard_max_overlap"] = kHardMaxOverlap;
  header["stride"] = config.stride;
  header["per_anchor_cap"] = config.per_anchor_cap;
  out << header.dump() << '\n';
  for (const auto& q : quadruplets) {
    ordered_json j;
    j["anchor"] = q.anchor;
    j["easy"] = q.easy;
    j["medium"] = q.medium;
    j["hard"] = q.hard;
    j["stats"] = ordered_json{{"easy", stats_to_json(q.easy_stats)},
                              {"medium", stats_to_json(q.medium_stats)},
                              {"hard", stats_to_json(q.hard_stats)}};
    out << j.dump() << '\n';
  }
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

std::vector<Quadruplet> load_quadruplets(const std::filesystem::path& path) {
  std::vector<Quadruplet> out;
  for (const auto& j : read_jsonl(path, "quadruplets")) {
    try {
      Quadruplet q;
      q.anchor = j.at("anchor").get<std::string>();
      q.easy = j.at("easy").get<std::string>();
      q.medium = j.at("medium").get<std::string>();
      q.hard = j.at("hard").get<std::string>();
      const auto& stats = j.at("stats");
      q.easy_stats = stats_from_json(stats.at("easy"));
      q.medium_stats = stats_from_json(stats.at("medium"));
      q.hard_stats = stats_from_json(stats.at("hard"));
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": bad quadruplet record: " + e.what());
    }
  }
  return out;
}

void save_overlap_pairs(const std::filesystem::path& path,
                        const std::vector<OverlapPair>& pairs, double min_overlap,
                        const MiningConfig& config) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  ordered_json header;
  header["type"] = "pairs";
  header["min_overlap"] = min_overlap;
  header["stride"] = config.stride;
  out << header.dump() << '\n';
  for (const auto& p : pairs) {
    ordered_json j;
    j["db"] = p.db;
    j["query"] = p.query;
    j["overlap"] = p.overlap;
    out << j.dump() << '\n';
  }
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

std::vector<OverlapPair> load_overlap_pairs(const std::filesystem::path& path) {
  std::vector<OverlapPair> out;
  for (const auto& j : read_jsonl(path, "pairs")) {
    try {
      OverlapPair p;
      p.db = j.at("db").get<std::string>();
      p.query = j.at("query").get<std::string>();
      p.overlap = j.at("overlap").get<double>();
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": bad pair record: " + e.what());
    }
  }
  return out;
}

}  // namespace reloc
