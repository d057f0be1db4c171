#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace imgseek {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorCode {
  UnknownComponent,
  InvalidParameter,
  Io,
  MalformedConfig,
  ImageTooSmall,
  NegativeComponent,
  TooFewSamples,
  DimensionMismatch,
  DuplicateId,
  UnknownMetric,
  EmptyInput,
  WeightMismatch,
  WeightsNotNormalized,
  InconsistentStats,
  ConfigInvalid,
  OutputNotWritable,
  IndexNotFound,
  UnknownImage,
  FeatureExtractionFailed,
  DecodeError,
  MissingVocabulary,
  CorpusTooSmall,
};

std::string_view toString(ErrorCode code);

/// Every failure raised by the engine carries one of the codes above so
/// callers (CLI exit codes, HTTP statuses) can map it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct DescriptorVector {
  std::string featureId;
  Vector values;
  // Set when the producing image yielded no local features.
  bool fromEmptyFeatures = false;

  Eigen::Index length() const { return values.size(); }
};

/// Fixed-length bit set, one bit per visual word.
class BinaryDescriptorVector {
 public:
  BinaryDescriptorVector() = default;
  BinaryDescriptorVector(std::string featureId, std::size_t bits);

  static BinaryDescriptorVector fromString(std::string featureId, std::string_view bits);

  std::size_t size() const { return bits_; }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool on = true);
  std::size_t popcount() const;
  const std::vector<std::uint64_t>& words() const { return words_; }
  const std::string& featureId() const { return featureId_; }

  /// 0/1 dense view for storage in numeric backends.
  Vector toDense() const;
  std::string toString() const;

 private:
  std::string featureId_;
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

enum class Polarity { Similarity, Distance };

std::string_view toString(Polarity p);
Polarity polarityFromString(std::string_view s);

struct ScoredEntry {
  std::string imageId;
  double score = 0.0;

  bool operator==(const ScoredEntry&) const = default;
};

/// Ranked (imageId, score) list, best first.
struct ScoredList {
  std::vector<ScoredEntry> entries;
  Polarity polarity = Polarity::Similarity;
  std::string sourceTag;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::vector<std::string> ids() const;

  /// Sorts best-first (ties by imageId) and truncates to topN.
  void sortAndTruncate(std::size_t topN);
  /// True when sorted best-first and ids are unique.
  bool wellFormed() const;
};

/// Distances become similarities through s = 1 / (1 + d); similarity lists
/// pass through unchanged.
ScoredList toSimilarity(const ScoredList& list);

/// True when a ranks strictly before b under polarity p (ties by imageId).
bool ranksBefore(const ScoredEntry& a, const ScoredEntry& b, Polarity p);

struct ImageRecord {
  std::string imageId;
  std::string uri;
  std::optional<std::string> caption;
  std::optional<std::string> modality;
  std::optional<std::string> articleUri;

  bool operator==(const ImageRecord&) const = default;
};

}  // namespace imgseek
