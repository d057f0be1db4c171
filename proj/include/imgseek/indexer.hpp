#pragma once

#include "imgseek/config.hpp"
#include "imgseek/image.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace imgseek {

/// File names inside an index directory.
namespace layout {
inline constexpr const char* kConfig = "index.json";
inline constexpr const char* kVocabulary = "vocabulary.bin";
inline constexpr const char* kStats = "stats.json";
inline constexpr const char* kFrequentItems = "frequent_items.jsonl";
inline constexpr const char* kRecords = "records.jsonl";
inline constexpr const char* kLsh = "lsh";
}  // namespace layout

struct IndexMode {
  int workers = 0;             // 0 = serial; otherwise the sharded worker pool
  std::size_t shardSize = 64;  // images per shard in parallel mode
};

using ImageLoader = std::function<Image(const ImageRecord&)>;

struct IndexJob {
  std::vector<ImageRecord> images;
  IndexConfig config;
  // Directory that a relative vocabRef is resolved against.
  std::filesystem::path configDir = ".";
  IndexMode mode;
  std::filesystem::path outputDir;
  // Defaults to decoding `uri` from disk, relative to `imageRoot`.
  ImageLoader loader;
  std::filesystem::path imageRoot = ".";
  // When set, the shard partition is written here as JSON lines.
  std::optional<std::filesystem::path> manifestPath;
  // Called at the start of every shard attempt; throwing simulates a lost worker.
  std::function<void(std::size_t shardId, int attempt)> shardHook;
};

struct ImageFailure {
  std::string imageId;
  std::string reason;
};

struct ShardFailure {
  std::size_t shardId = 0;
  std::string reason;
};

struct IndexReport {
  std::size_t input = 0;
  std::size_t indexed = 0;
  std::size_t failed = 0;
  std::vector<ImageFailure> failures;
  std::vector<ShardFailure> shardFailures;
  std::size_t shards = 0;
  int workers = 0;
  double wallSeconds = 0.0;
  bool ok = true;

  nlohmann::json toJson() const;
};

struct Shard {
  std::size_t shardId = 0;
  std::vector<std::string> imageIds;
};

/// Fixed-size partition of the job's images, in job order.
std::vector<Shard> partitionShards(const std::vector<ImageRecord>& images, std::size_t shardSize);
void writeShardManifest(const std::vector<Shard>& shards, const std::filesystem::path& path);
std::vector<Shard> readShardManifest(const std::filesystem::path& path);

/// Extract, describe and store every image, then weight and build ANN.
/// Throws ConfigInvalid, MissingVocabulary, DuplicateId or OutputNotWritable;
/// per-image problems are reported, never thrown.
IndexReport runIndex(const IndexJob& job);

/// Concatenates segment directories built with the same config into a new
/// index, recomputing collection statistics and the ANN tables.
IndexReport mergeSegments(const std::vector<std::filesystem::path>& segments, const std::filesystem::path& outputDir,
                          int workers = 1);

void saveRecords(const std::vector<ImageRecord>& records, const std::filesystem::path& path);
std::vector<ImageRecord> loadRecords(const std::filesystem::path& path);
nlohmann::json toJson(const ImageRecord& record);
ImageRecord recordFromJson(const nlohmann::json& j);

/// Name of the store that holds the search-space (weighted) vectors.
StorerParams weightedStoreParams(const StorerParams& raw);

}  // namespace imgseek
