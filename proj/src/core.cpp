#include "imgseek/core.hpp"

#include <algorithm>
#include <bit>
#include <set>

namespace imgseek {

std::string_view toString(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownComponent: return "UnknownComponent";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::MalformedConfig: return "MalformedConfig";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::NegativeComponent: return "NegativeComponent";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::WeightMismatch: return "WeightMismatch";
    case ErrorCode::WeightsNotNormalized: return "WeightsNotNormalized";
    case ErrorCode::InconsistentStats: return "InconsistentStats";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::OutputNotWritable: return "OutputNotWritable";
    case ErrorCode::IndexNotFound: return "IndexNotFound";
    case ErrorCode::UnknownImage: return "UnknownImage";
    case ErrorCode::FeatureExtractionFailed: return "FeatureExtractionFailed";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::MissingVocabulary: return "MissingVocabulary";
    case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
  }
  return "Unknown";
}

BinaryDescriptorVector::BinaryDescriptorVector(std::string featureId, std::size_t bits)
    : featureId_(std::move(featureId)), bits_(bits), words_((bits + 63) / 64, 0) {}

BinaryDescriptorVector BinaryDescriptorVector::fromString(std::string featureId, std::string_view bits) {
  BinaryDescriptorVector out(std::move(featureId), bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1')
      throw Error(ErrorCode::InvalidParameter, "bit string may only contain 0 and 1");
    out.set(i, bits[i] == '1');
  }
  return out;
}

void BinaryDescriptorVector::set(std::size_t i, bool on) {
  const std::uint64_t mask = std::uint64_t{1} << (i & 63);
  if (on)
    words_[i >> 6] |= mask;
  else
    words_[i >> 6] &= ~mask;
}

std::size_t BinaryDescriptorVector::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

Vector BinaryDescriptorVector::toDense() const {
  Vector v(static_cast<Eigen::Index>(bits_));
  for (std::size_t i = 0; i < bits_; ++i) v[static_cast<Eigen::Index>(i)] = test(i) ? 1.0 : 0.0;
  return v;
}

std::string BinaryDescriptorVector::toString() const {
  std::string s(bits_, '0');
  for (std::size_t i = 0; i < bits_; ++i)
    if (test(i)) s[i] = '1';
  return s;
}

std::string_view toString(Polarity p) {
  return p == Polarity::Similarity ? "similarity" : "distance";
}

Polarity polarityFromString(std::string_view s) {
  if (s == "similarity") return Polarity::Similarity;
  if (s == "distance") return Polarity::Distance;
  throw Error(ErrorCode::InvalidParameter, "unknown polarity '" + std::string(s) + "'");
}

bool ranksBefore(const ScoredEntry& a, const ScoredEntry& b, Polarity p) {
  if (a.score != b.score)
    return p == Polarity::Similarity ? a.score > b.score : a.score < b.score;
  return a.imageId < b.imageId;
}

std::vector<std::string> ScoredList::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.imageId);
  return out;
}

void ScoredList::sortAndTruncate(std::size_t topN) {
  const auto pol = polarity;
  auto cmp = [pol](const ScoredEntry& a, const ScoredEntry& b) { return ranksBefore(a, b, pol); };
  if (topN < entries.size()) {
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(topN), entries.end(), cmp);
    entries.resize(topN);
  } else {
    std::sort(entries.begin(), entries.end(), cmp);
  }
}

bool ScoredList::wellFormed() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!seen.insert(entries[i].imageId).second) return false;
    if (i > 0 && ranksBefore(entries[i], entries[i - 1], polarity)) return false;
  }
  return true;
}

ScoredList toSimilarity(const ScoredList& list) {
  if (list.polarity == Polarity::Similarity) return list;
  ScoredList out;
  out.polarity = Polarity::Similarity;
  out.sourceTag = list.sourceTag;
  out.entries.reserve(list.entries.size());
  for (const auto& e : list.entries) out.entries.push_back({e.imageId, 1.0 / (1.0 + e.score)});
  // 1/(1+d) is monotone decreasing in d, so only tied scores may need reordering.
  out.sortAndTruncate(out.entries.size());
  return out;
}

}  // namespace imgseek
