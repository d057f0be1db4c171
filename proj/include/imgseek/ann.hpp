#pragma once

#include "imgseek/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace imgseek {

struct LshParams {
  int tables = 20;           // L
  int hashesPerTable = 8;    // k
  double bucketWidth = 0.0;  // w; <= 0 means "estimate from the data"
  std::uint64_t seed = 1;
  int dimension = 0;

  bool operator==(const LshParams&) const = default;
};

/// Reproducible uniform in [0, 1) addressed by (seed, stream, counter).
double counterUniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
/// Standard normal from the same counter space (Box-Muller on two uniforms).
double counterNormal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

/// 0.1 x mean pairwise Euclidean distance over the first min(n, 1000) rows.
double estimateBucketWidth(const RowMatrix& vectors);

/// E2LSH tables: h(v) = floor((a . v + b) / w), k hashes per table, each
/// table keyed by a 64-bit fingerprint of the k-tuple.
class LshIndex {
 public:
  using Bucket = std::vector<std::string>;

  LshIndex() = default;

  /// Tables are built independently (`workers` threads); the result does not
  /// depend on the worker count.
  static LshIndex build(const std::vector<std::string>& ids, const RowMatrix& vectors, LshParams params,
                        int workers = 1);

  /// Union over tables of the query's bucket, sorted by imageId.
  std::vector<std::string> shortlist(const Vector& query) const;

  std::vector<std::int64_t> hashTuple(int table, const Vector& v) const;
  std::uint64_t bucketKey(int table, const Vector& v) const;

  const LshParams& params() const { return params_; }
  const std::map<std::uint64_t, Bucket>& table(int t) const { return tables_[static_cast<std::size_t>(t)]; }
  std::size_t indexedCount() const { return count_; }

  void save(const std::filesystem::path& dir) const;
  static LshIndex load(const std::filesystem::path& dir);

 private:
  void makeProjections();

  LshParams params_;
  std::vector<RowMatrix> projections_;  // per table: k x d
  std::vector<Vector> offsets_;         // per table: k
  std::vector<std::map<std::uint64_t, Bucket>> tables_;
  std::size_t count_ = 0;
};

}  // namespace imgseek
