#pragma once

#include "imgseek/ann.hpp"
#include "imgseek/descriptor.hpp"
#include "imgseek/extractor.hpp"
#include "imgseek/storer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace imgseek {

inline constexpr const char* kConfigVersion = "1.0";

struct WeightingParams {
  std::string kind = "none";  // none | tfidf | frequent-items
  int k = 0;                  // frequent-items only

  bool operator==(const WeightingParams&) const = default;
};

/// Everything needed to reproduce index-time extraction at query time.
struct IndexConfig {
  std::string version = kConfigVersion;
  ExtractorParams extractor;
  DescriptorParams descriptor;
  WeightingParams weighting;
  std::optional<LshParams> ann;
  StorerParams storer;
  std::string distanceDefault = "histogram-intersection";

  bool operator==(const IndexConfig&) const = default;
};

nlohmann::json toJson(const IndexConfig& config);
/// Schema check only; throws MalformedConfig.
IndexConfig configFromJson(const nlohmann::json& j);

void saveConfig(const IndexConfig& config, const std::filesystem::path& path);
/// Parses, validates and resolves vocabRef relative to the config's
/// directory; a dangling or dimension-incompatible vocabulary is
/// MalformedConfig.
IndexConfig loadConfig(const std::filesystem::path& path);

/// Throws ConfigInvalid when fields are out of range or inconsistent.
void validateConfig(const IndexConfig& config);

/// Extractor -> Descriptor chain built from one IndexConfig. The local
/// feature path runs only for vocabulary-based representations.
class Pipeline {
 public:
  Pipeline(const IndexConfig& config, std::shared_ptr<const Codebook> codebook);
  /// Loads the referenced codebook from `baseDir / vocabRef` when needed.
  static Pipeline fromConfig(const IndexConfig& config, const std::filesystem::path& baseDir);

  DescriptorVector describe(const Image& image) const;
  int dimension() const { return descriptor_->dimension(); }
  const std::shared_ptr<const Codebook>& codebook() const { return codebook_; }
  std::string featureId() const;

 private:
  std::shared_ptr<const Extractor> extractor_;
  std::shared_ptr<const Descriptor> descriptor_;
  std::shared_ptr<const Codebook> codebook_;
};

}  // namespace imgseek
