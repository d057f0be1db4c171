#pragma once

#include "imgseek/ann.hpp"
#include "imgseek/config.hpp"
#include "imgseek/fusor.hpp"
#include "imgseek/image.hpp"
#include "imgseek/storer.hpp"
#include "imgseek/weighting.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace imgseek {

/// A query example is either an indexed imageId or raw pixels.
using QueryExample = std::variant<std::string, Image>;

struct QuerySpec {
  std::vector<QueryExample> positives;
  std::vector<QueryExample> negatives;
  std::optional<std::string> text;
  std::vector<std::string> modalities;  // empty = no filtering
  std::size_t topN = 30;
  std::optional<std::string> metricOverride;
  // Restricts scoring to these ids (e.g. text results); overrides ANN.
  std::optional<std::vector<std::string>> shortlist;
};

struct RocchioParams {
  double alpha = 0.0;
  double beta = 0.6;
  double gamma = 0.4;
};

/// q_m = alpha q_o + beta mean(relevant) - gamma mean(nonrelevant); an empty
/// set contributes nothing. No clamping.
Vector rocchioMerge(const Vector& original, const std::vector<Vector>& relevant,
                    const std::vector<Vector>& nonrelevant, const RocchioParams& params);

/// Read-only handle over an index directory.
class VisualIndex {
 public:
  /// Throws IndexNotFound when `dir` holds no index.
  static std::shared_ptr<const VisualIndex> open(const std::filesystem::path& dir);

  const IndexConfig& config() const { return config_; }
  const Pipeline& pipeline() const { return *pipeline_; }
  const std::filesystem::path& directory() const { return dir_; }
  /// Descriptors as extracted.
  const MemoryStorer& rawStore() const { return *raw_; }
  /// Vectors that are actually ranked (weighted when weighting is on).
  const MemoryStorer& searchStore() const { return weighted_ ? *weighted_ : *raw_; }
  const LshIndex* lsh() const { return lsh_ ? &*lsh_ : nullptr; }
  const std::optional<CollectionStats>& stats() const { return stats_; }
  const std::vector<ImageRecord>& records() const { return records_; }
  const ImageRecord* record(const std::string& imageId) const;

  /// Raw descriptor for pixels (query-time extraction) or a stored id.
  Vector rawVector(const QueryExample& example) const;
  /// Applies TF-IDF when the index is weighted; identity otherwise.
  Vector weight(const Vector& raw) const;
  /// Turns a merged query into the vector compared against `searchStore`:
  /// top-k indicator for frequent items, else clamps negatives for metrics
  /// defined only on non-negative input.
  Vector finalizeQuery(const Vector& merged, const Metric& metric) const;
  const Metric& metricFor(const QuerySpec& query) const;

 private:
  std::filesystem::path dir_;
  IndexConfig config_;
  std::unique_ptr<Pipeline> pipeline_;
  std::unique_ptr<MemoryStorer> raw_;
  std::unique_ptr<MemoryStorer> weighted_;
  std::optional<LshIndex> lsh_;
  std::optional<CollectionStats> stats_;
  std::vector<ImageRecord> records_;
  std::unordered_map<std::string, std::size_t> recordOf_;
};

/// The Rocchio seeker: examples described with the index's own pipeline,
/// merged, then ranked over the shortlist (explicit, ANN or everything).
/// q_o is the mean of the positives.
ScoredList searchRocchio(const QuerySpec& query, const VisualIndex& index, const RocchioParams& params = {});

/// One search per positive (negatives ignored), fused with `rule`. Each
/// per-positive list is cut at `listDepth` before fusion.
ScoredList searchLateFusion(const QuerySpec& query, const VisualIndex& index, const FusionRule& rule,
                            std::size_t listDepth = 1000);

/// Rocchio with the deployed defaults, then drops entries whose modality is
/// not in query.modalities before truncating to topN.
ScoredList searchModalityFiltered(const QuerySpec& query, const VisualIndex& index,
                                  const RocchioParams& params = {});

/// Keeps entries whose record modality is in `modalities` (all when empty).
ScoredList filterByModality(const ScoredList& list, const VisualIndex& index,
                            const std::vector<std::string>& modalities);

}  // namespace imgseek
