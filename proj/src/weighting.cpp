#include "imgseek/weighting.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace imgseek {

double tfidfTerm(double termCount, double documentLength, double documentFrequency, double documents) {
  if (termCount == 0 || documentLength == 0 || documentFrequency == 0) return 0.0;
  return (termCount / documentLength) * std::log(documents / documentFrequency);
}

void StatsAccumulator::add(const Vector& histogram) {
  if (static_cast<std::size_t>(histogram.size()) != stats_.documentFrequency.size())
    throw Error(ErrorCode::DimensionMismatch, "histogram length differs from stats vocabulary");
  ++stats_.documents;
  for (Eigen::Index i = 0; i < histogram.size(); ++i)
    if (histogram[i] != 0) ++stats_.documentFrequency[static_cast<std::size_t>(i)];
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  if (other.stats_.documentFrequency.size() != stats_.documentFrequency.size())
    throw Error(ErrorCode::DimensionMismatch, "cannot merge stats of different vocabularies");
  stats_.documents += other.stats_.documents;
  for (std::size_t i = 0; i < stats_.documentFrequency.size(); ++i)
    stats_.documentFrequency[i] += other.stats_.documentFrequency[i];
}

CollectionStats collectionStats(const std::vector<Vector>& histograms) {
  if (histograms.empty()) return {};
  StatsAccumulator acc(static_cast<std::size_t>(histograms.front().size()));
  for (const auto& h : histograms) acc.add(h);
  return acc.stats();
}

DescriptorVector tfidfWeight(const DescriptorVector& histogram, const CollectionStats& stats) {
  const auto& h = histogram.values;
  if (static_cast<std::size_t>(h.size()) != stats.documentFrequency.size())
    throw Error(ErrorCode::DimensionMismatch, "histogram length differs from stats vocabulary");
  for (auto n : stats.documentFrequency)
    if (n > stats.documents)
      throw Error(ErrorCode::InconsistentStats, "document frequency exceeds document count");
  if ((h.array() < 0).any()) throw Error(ErrorCode::InvalidParameter, "TF-IDF requires non-negative counts");
  const double length = h.sum();
  DescriptorVector out{histogram.featureId, Vector::Zero(h.size()), histogram.fromEmptyFeatures};
  for (Eigen::Index i = 0; i < h.size(); ++i)
    out.values[i] = tfidfTerm(h[i], length, static_cast<double>(stats.documentFrequency[static_cast<std::size_t>(i)]),
                              static_cast<double>(stats.documents));
  return out;
}

std::vector<int> selectFrequentItems(const Vector& weighted, int k) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < weighted.size(); ++i)
    if (weighted[i] > 0) idx.push_back(static_cast<int>(i));
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), [&](int a, int b) {
    if (weighted[a] != weighted[b]) return weighted[a] > weighted[b];
    return a < b;
  });
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Vector indicatorVector(const std::vector<int>& items, Eigen::Index length) {
  Vector v = Vector::Zero(length);
  for (int i : items) v[i] = 1.0;
  return v;
}

void saveStats(const CollectionStats& stats, const std::filesystem::path& path) {
  nlohmann::json j{{"documents", stats.documents}, {"documentFrequency", stats.documentFrequency}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump() << '\n';
}

CollectionStats loadStats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return {j.at("documents").get<std::uint64_t>(), j.at("documentFrequency").get<std::vector<std::uint64_t>>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

void saveFrequentItems(const std::vector<FrequentItemSet>& sets, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& s : sets) out << nlohmann::json{{"imageId", s.imageId}, {"items", s.items}}.dump() << '\n';
}

std::vector<FrequentItemSet> loadFrequentItems(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<FrequentItemSet> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("imageId").get<std::string>(), j.at("items").get<std::vector<int>>()});
  }
  return out;
}

}  // namespace imgseek
