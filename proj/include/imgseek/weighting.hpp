#pragma once

#include "imgseek/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace imgseek {

/// Document count N and per-term document frequencies n_i.
struct CollectionStats {
  std::uint64_t documents = 0;
  std::vector<std::uint64_t> documentFrequency;

  bool operator==(const CollectionStats&) const = default;
};

/// Single TF-IDF term: (n_id / n_d) * ln(N / n_i), 0 when n_i or n_d is 0.
double tfidfTerm(double termCount, double documentLength, double documentFrequency, double documents);

/// Accumulates document frequencies over histograms; associative, so partial
/// stats from shards can be merged.
class StatsAccumulator {
 public:
  explicit StatsAccumulator(std::size_t terms) : stats_{0, std::vector<std::uint64_t>(terms, 0)} {}
  void add(const Vector& histogram);
  void merge(const StatsAccumulator& other);
  const CollectionStats& stats() const { return stats_; }

 private:
  CollectionStats stats_;
};

CollectionStats collectionStats(const std::vector<Vector>& histograms);

/// Component-wise TF-IDF of a count histogram. Any positive rescaling of the
/// counts gives the same result, so normalised histograms may be passed too.
DescriptorVector tfidfWeight(const DescriptorVector& histogram, const CollectionStats& stats);

struct FrequentItemSet {
  std::string imageId;
  std::vector<int> items;  // ascending

  bool operator==(const FrequentItemSet&) const = default;
};

/// Indices of the k largest positive weights (ties to the lowest index),
/// returned in ascending index order.
std::vector<int> selectFrequentItems(const Vector& weighted, int k);

/// 0/1 vector of the given length with ones at `items`.
Vector indicatorVector(const std::vector<int>& items, Eigen::Index length);

void saveStats(const CollectionStats& stats, const std::filesystem::path& path);
CollectionStats loadStats(const std::filesystem::path& path);

void saveFrequentItems(const std::vector<FrequentItemSet>& sets, const std::filesystem::path& path);
std::vector<FrequentItemSet> loadFrequentItems(const std::filesystem::path& path);

}  // namespace imgseek
