#include "reloc/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "reloc/errors.hpp"

namespace reloc {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

// The file format is little-endian; this implementation writes native byte
// order and targets little-endian hosts.
template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw ParseError("index file " + path + " is truncated");
  }
  return value;
}

}  // namespace

EmbeddingIndex::EmbeddingIndex(int dim) : dim_(dim) {
  if (dim < 1) {
    throw DomainError("index dimension must be >= 1");
  }
}

void EmbeddingIndex::insert(IndexEntry entry) {
  if (entry.embedding.size() != dim_) {
    throw DimensionMismatch("embedding has dimension " +
                            std::to_string(entry.embedding.size()) + ", index expects " +
                            std::to_string(dim_));
  }
  if (!entry.embedding.allFinite()) {
    throw DomainError("embedding for " + entry.frame_id + " has non-finite components");
  }
  for (const auto& existing : entries_) {
    if (existing.frame_id == entry.frame_id) {
      throw DuplicateId("frame id already indexed: " + entry.frame_id);
    }
  }
  entries_.push_back(std::move(entry));
}

std::vector<std::pair<const IndexEntry*, double>> EmbeddingIndex::query_knn(
    const Eigen::VectorXd& query, int k) const {
  if (entries_.empty()) {
    throw EmptyIndex("query on empty index");
  }
  if (k < 1) {
    throw DomainError("k must be >= 1");
  }
  if (query.size() != dim_) {
    throw DimensionMismatch("query has dimension " + std::to_string(query.size()) +
                            ", index expects " + std::to_string(dim_));
  }

  std::vector<std::pair<double, const IndexEntry*>> scored;
  scored.reserve(entries_.size());
  for (const auto& entry : entries_) {
    scored.emplace_back((entry.embedding - query).squaredNorm(), &entry);
  }
  const auto by_distance_then_id = [](const auto& a, const auto& b) {
    if (a.first != b.first) {
      return a.first < b.first;
    }
    return a.second->frame_id < b.second->frame_id;
  };
  const std::size_t take = std::min<std::size_t>(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                    by_distance_then_id);

  std::vector<std::pair<const IndexEntry*, double>> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.emplace_back(scored[i].second, std::sqrt(scored[i].first));
  }
  return out;
}

std::pair<double, double> EmbeddingIndex::retrieval_error(
    const Eigen::VectorXd& query_embedding, const Pose& query_gt_pose) const {
  const auto top = query_knn(query_embedding, 1);
  const Pose& neighbor = top.front().first->pose;
  const double t_err = (query_gt_pose.t - neighbor.t).norm();
  const double r_err = rotation_error_degrees(query_gt_pose.q, neighbor.q);
  return {t_err, r_err};
}

void EmbeddingIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write index file " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(dim_));
  write_pod(out, static_cast<std::uint64_t>(entries_.size()));
  for (const auto& entry : entries_) {
    write_pod(out, static_cast<std::uint32_t>(entry.frame_id.size()));
    out.write(entry.frame_id.data(), static_cast<std::streamsize>(entry.frame_id.size()));
    for (int i = 0; i < dim_; ++i) {
      write_pod(out, static_cast<float>(entry.embedding(i)));
    }
    const double pose7[7] = {entry.pose.t.x(), entry.pose.t.y(), entry.pose.t.z(),
                             entry.pose.q.w,   entry.pose.q.x,   entry.pose.q.y,
                             entry.pose.q.z};
    for (double v : pose7) {
      write_pod(out, static_cast<float>(v));
    }
  }
  if (!out) {
    throw IoError("failed writing index file " + path.string());
  }
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open index file " + path.string());
  }
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw UnsupportedFormat("not an index file: " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, path.string());
  if (version != kVersion) {
    throw UnsupportedFormat("index file " + path.string() + " has unsupported version " +
                            std::to_string(version));
  }
  const auto dim = read_pod<std::uint32_t>(in, path.string());
  const auto count = read_pod<std::uint64_t>(in, path.string());
  if (dim < 1) {
    throw ParseError("index file " + path.string() + " declares dimension 0");
  }

  EmbeddingIndex index(static_cast<int>(dim));
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id_len = read_pod<std::uint32_t>(in, path.string());
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    if (!in) {
      throw ParseError("index file " + path.string() + " is truncated");
    }
    IndexEntry entry;
    entry.frame_id = std::move(id);
    entry.embedding.resize(dim);
    for (std::uint32_t d = 0; d < dim; ++d) {
      entry.embedding(d) = read_pod<float>(in, path.string());
    }
    float pose7[7];
    for (float& v : pose7) {
      v = read_pod<float>(in, path.string());
    }
    entry.pose.t = Eigen::Vector3d(pose7[0], pose7[1], pose7[2]);
    entry.pose.q = UnitQuaternion(pose7[3], pose7[4], pose7[5], pose7[6]);
    index.insert(std::move(entry));
  }
  return index;
}

}  // namespace reloc
