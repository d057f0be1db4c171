#include "imgseek/indexer.hpp"

#include "imgseek/ann.hpp"
#include "imgseek/vocabulary.hpp"
#include "imgseek/weighting.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <thread>

namespace imgseek {

using nlohmann::json;
namespace fs = std::filesystem;

json IndexReport::toJson() const {
  json failuresJson = json::array();
  for (const auto& f : failures) failuresJson.push_back({{"imageId", f.imageId}, {"reason", f.reason}});
  json shardJson = json::array();
  for (const auto& f : shardFailures) shardJson.push_back({{"shardId", f.shardId}, {"reason", f.reason}});
  return {{"input", input},   {"indexed", indexed}, {"failed", failed},   {"failures", failuresJson},
          {"shardFailures", shardJson}, {"shards", shards}, {"workers", workers}, {"wallSeconds", wallSeconds},
          {"ok", ok}};
}

json toJson(const ImageRecord& r) {
  json j{{"imageId", r.imageId}, {"uri", r.uri}};
  if (r.caption) j["caption"] = *r.caption;
  if (r.modality) j["modality"] = *r.modality;
  if (r.articleUri) j["articleUri"] = *r.articleUri;
  return j;
}

ImageRecord recordFromJson(const json& j) {
  ImageRecord r;
  r.imageId = j.at("imageId").get<std::string>();
  r.uri = j.value("uri", std::string());
  auto optional = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
  };
  r.caption = optional("caption");
  r.modality = optional("modality");
  r.articleUri = optional("articleUri");
  return r;
}

void saveRecords(const std::vector<ImageRecord>& records, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& r : records) out << toJson(r).dump() << '\n';
}

std::vector<ImageRecord> loadRecords(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<ImageRecord> records;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(recordFromJson(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return records;
}

std::vector<Shard> partitionShards(const std::vector<ImageRecord>& images, std::size_t shardSize) {
  if (shardSize == 0) throw Error(ErrorCode::InvalidParameter, "shard size must be >= 1");
  std::vector<Shard> shards;
  for (std::size_t begin = 0; begin < images.size(); begin += shardSize) {
    Shard s{shards.size(), {}};
    for (std::size_t i = begin; i < std::min(images.size(), begin + shardSize); ++i)
      s.imageIds.push_back(images[i].imageId);
    shards.push_back(std::move(s));
  }
  return shards;
}

void writeShardManifest(const std::vector<Shard>& shards, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::OutputNotWritable, "cannot write manifest " + path.string());
  for (const auto& s : shards) out << json{{"shardId", s.shardId}, {"imageIds", s.imageIds}}.dump() << '\n';
}

std::vector<Shard> readShardManifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  std::vector<Shard> shards;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    shards.push_back({j.at("shardId").get<std::size_t>(), j.at("imageIds").get<std::vector<std::string>>()});
  }
  return shards;
}

StorerParams weightedStoreParams(const StorerParams& raw) {
  return {raw.backend, raw.backend == "csv" ? "weighted.csv" : "weighted.bin"};
}

namespace {

struct Described {
  std::string imageId;
  DescriptorVector vector;
};

void prepareOutput(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::OutputNotWritable, "cannot create " + dir.string());
  const auto probe = dir / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw Error(ErrorCode::OutputNotWritable, dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
  // Artifacts that a previous run with a different config may have left.
  for (const char* name : {layout::kStats, layout::kFrequentItems, "weighted.bin", "weighted.csv",
                           "weighted.csv.meta.json"})
    fs::remove(dir / name, ec);
  fs::remove_all(dir / layout::kLsh, ec);
}

/// Everything after the map phase: ordered storage, weighting, ANN, config.
void writeIndex(const fs::path& dir, IndexConfig config, const std::shared_ptr<const Codebook>& codebook,
                std::vector<Described> rows, std::vector<ImageRecord> records, const std::string& featureId,
                int dimension, int workers) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.imageId < b.imageId; });
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.imageId < b.imageId; });

  if (codebook) {
    saveCodebook(*codebook, dir / layout::kVocabulary);
    config.descriptor.vocabRef = layout::kVocabulary;
  }

  auto raw = createStorer(config.storer, dir, featureId, dimension);
  for (const auto& r : rows) raw->insert(r.imageId, r.vector);
  raw->flush();

  const MemoryStorer* search = raw.get();
  std::unique_ptr<MemoryStorer> weighted;
  if (config.weighting.kind != "none") {
    StatsAccumulator acc(static_cast<std::size_t>(dimension));
    for (const auto& r : rows) acc.add(r.vector.values);
    const CollectionStats& stats = acc.stats();
    saveStats(stats, dir / layout::kStats);

    weighted = createStorer(weightedStoreParams(config.storer), dir, featureId + "+" + config.weighting.kind,
                            dimension);
    std::vector<FrequentItemSet> itemSets;
    for (const auto& r : rows) {
      DescriptorVector w = tfidfWeight(r.vector, stats);
      if (config.weighting.kind == "frequent-items") {
        itemSets.push_back({r.imageId, selectFrequentItems(w.values, config.weighting.k)});
        w.values = indicatorVector(itemSets.back().items, dimension);
      }
      weighted->insert(r.imageId, w);
    }
    weighted->flush();
    if (!itemSets.empty() || config.weighting.kind == "frequent-items")
      saveFrequentItems(itemSets, dir / layout::kFrequentItems);
    search = weighted.get();
  }

  if (config.ann && search->count() > 0) {
    LshParams p = *config.ann;
    p.dimension = dimension;
    LshIndex::build(search->ids(), search->matrix(), p, workers).save(dir / layout::kLsh);
  }

  saveRecords(records, dir / layout::kRecords);
  saveConfig(config, dir / layout::kConfig);
}

struct ShardOutcome {
  std::vector<Described> described;
  std::vector<ImageFailure> failures;
};

ShardOutcome describeImages(const std::vector<const ImageRecord*>& images, const Pipeline& pipeline,
                            const ImageLoader& loader) {
  ShardOutcome out;
  for (const ImageRecord* rec : images) {
    try {
      out.described.push_back({rec->imageId, pipeline.describe(loader(*rec))});
    } catch (const std::exception& e) {
      out.failures.push_back({rec->imageId, e.what()});
    }
  }
  return out;
}

}  // namespace

IndexReport runIndex(const IndexJob& job) {
  const auto start = std::chrono::steady_clock::now();
  validateConfig(job.config);
  {
    std::set<std::string> seen;
    for (const auto& r : job.images)
      if (!seen.insert(r.imageId).second) throw Error(ErrorCode::DuplicateId, "imageId '" + r.imageId + "' repeats");
  }
  const Pipeline pipeline = Pipeline::fromConfig(job.config, job.configDir);
  prepareOutput(job.outputDir);

  const ImageLoader loader = job.loader ? job.loader : [root = job.imageRoot](const ImageRecord& r) {
    return loadImage(root / r.uri);
  };
  std::map<std::string, const ImageRecord*> byId;
  for (const auto& r : job.images) byId.emplace(r.imageId, &r);

  IndexReport report;
  report.input = job.images.size();
  report.workers = job.mode.workers;

  std::vector<ShardOutcome> outcomes;
  if (job.mode.workers <= 0) {
    std::vector<const ImageRecord*> all;
    for (const auto& r : job.images) all.push_back(&r);
    outcomes.push_back(describeImages(all, pipeline, loader));
    report.shards = 1;
  } else {
    const auto shards = partitionShards(job.images, job.mode.shardSize);
    if (job.manifestPath) writeShardManifest(shards, *job.manifestPath);
    report.shards = shards.size();
    outcomes.resize(shards.size());
    std::vector<std::optional<std::string>> shardError(shards.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t s = next++; s < shards.size(); s = next++) {
        std::vector<const ImageRecord*> images;
        for (const auto& id : shards[s].imageIds) images.push_back(byId.at(id));
        for (int attempt = 0; attempt < 2; ++attempt) {
          try {
            if (job.shardHook) job.shardHook(s, attempt);
            outcomes[s] = describeImages(images, pipeline, loader);
            shardError[s].reset();
            break;
          } catch (const std::exception& e) {
            shardError[s] = e.what();
          }
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(job.mode.workers), shards.size());
      for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    }
    for (std::size_t s = 0; s < shards.size(); ++s) {
      if (!shardError[s]) continue;
      report.shardFailures.push_back({s, *shardError[s]});
      outcomes[s] = {};
      for (const auto& id : shards[s].imageIds)
        outcomes[s].failures.push_back({id, "shard " + std::to_string(s) + " failed: " + *shardError[s]});
    }
  }

  std::vector<Described> rows;
  std::vector<ImageRecord> records;
  for (auto& o : outcomes) {
    for (auto& d : o.described) {
      records.push_back(*byId.at(d.imageId));
      rows.push_back(std::move(d));
    }
    for (auto& f : o.failures) report.failures.push_back(std::move(f));
  }
  std::sort(report.failures.begin(), report.failures.end(),
            [](const auto& a, const auto& b) { return a.imageId < b.imageId; });
  report.indexed = rows.size();
  report.failed = report.failures.size();
  report.ok = report.shardFailures.empty();

  writeIndex(job.outputDir, job.config, pipeline.codebook(), std::move(rows), std::move(records),
             pipeline.featureId(), pipeline.dimension(), std::max(1, job.mode.workers));
  report.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

IndexReport mergeSegments(const std::vector<fs::path>& segments, const fs::path& outputDir, int workers) {
  const auto start = std::chrono::steady_clock::now();
  if (segments.empty()) throw Error(ErrorCode::EmptyInput, "no segments to merge");
  std::optional<IndexConfig> config;
  std::shared_ptr<const Codebook> codebook;
  std::vector<Described> rows;
  std::vector<ImageRecord> records;
  std::set<std::string> seen;
  std::string featureId;
  int dimension = 0;
  for (const auto& seg : segments) {
    IndexConfig c = loadConfig(seg / layout::kConfig);
    if (!config) {
      config = c;
      if (c.descriptor.vocabRef)
        codebook = std::make_shared<const Codebook>(loadCodebook(seg / *c.descriptor.vocabRef));
    } else if (!(c == *config)) {
      throw Error(ErrorCode::ConfigInvalid, "segment " + seg.string() + " was built with a different config");
    }
    auto store = openStorer(c.storer, seg);
    featureId = store->featureId();
    dimension = store->dimension();
    for (std::size_t i = 0; i < store->count(); ++i) {
      const auto& id = store->ids()[i];
      if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateId, "imageId '" + id + "' is in several segments");
      rows.push_back({id, {featureId, Vector(store->row(i)), false}});
    }
    for (auto& r : loadRecords(seg / layout::kRecords)) records.push_back(std::move(r));
  }
  prepareOutput(outputDir);
  IndexReport report;
  report.input = report.indexed = rows.size();
  report.workers = workers;
  report.shards = segments.size();
  writeIndex(outputDir, *config, codebook, std::move(rows), std::move(records), featureId, dimension,
             std::max(1, workers));
  report.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace imgseek
