#pragma once

#include "imgseek/fusor.hpp"
#include "imgseek/indexer.hpp"
#include "imgseek/seeker.hpp"
#include "imgseek/textsearch.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace imgseek {

inline constexpr std::size_t kMaxPayloadBytes = 10u * 1024u * 1024u;
inline constexpr std::size_t kDefaultTopN = 30;
inline constexpr std::size_t kMaxTopN = 1000;

/// Body of /search, /visual-search and /text-search.
struct ApiQuery {
  std::vector<QueryExample> positives;
  std::vector<QueryExample> negatives;
  std::optional<std::string> text;
  std::vector<std::string> modalities;
  std::size_t topN = kDefaultTopN;
  std::vector<std::string> indexNames;  // empty = every registered index
};

/// Throws InvalidParameter on schema violations and DecodeError on
/// undecodable image payloads.
ApiQuery parseApiQuery(const nlohmann::json& body);

struct SearchDefaults {
  std::size_t textShortlist = 1000;  // text hits that become the visual shortlist
  std::size_t visualDepth = 1000;    // per-index list length entering fusion
  RocchioParams rocchio;
};

nlohmann::json toJson(const ScoredList& list);
ScoredList scoredListFromJson(const nlohmann::json& j);
FusionRule fusionRuleFromJson(const nlohmann::json& j);

/// 400 / 404 / 409 / 422 / 500 for an engine error code.
int httpStatusFor(ErrorCode code);

/// Library form of the REST service: every endpoint is one call here.
class Engine {
 public:
  /// Registers every sub-directory of `indexRoot` that holds an index.
  explicit Engine(std::filesystem::path indexRoot, SearchDefaults defaults = {});
  ~Engine();

  void registerIndex(const std::string& name, const std::filesystem::path& dir);
  std::shared_ptr<const VisualIndex> index(const std::string& name) const;
  std::vector<std::string> indexNames() const;
  const SearchDefaults& defaults() const { return defaults_; }

  /// Caption search over the records of the query's indices, filtered by
  /// modality. Negated terms are caption terms of the negative examples that
  /// occur neither in the positives' captions nor in the query text.
  ScoredList textSearch(const ApiQuery& query, std::size_t depth) const;
  /// One modality-filtered Rocchio list per selected index, searched in
  /// parallel.
  std::vector<ScoredList> visualLists(const ApiQuery& query, const std::optional<std::vector<std::string>>& shortlist,
                                      std::size_t depth) const;
  /// visualLists combined with combMNZ; a single index is returned as is.
  ScoredList visualSearch(const ApiQuery& query, const std::optional<std::vector<std::string>>& shortlist,
                          std::size_t depth) const;
  /// Text pipeline, text hits as visual shortlist, combMNZ across indices,
  /// rrf with the text list.
  ScoredList search(const ApiQuery& query) const;

  /// Result rows with record enrichment.
  nlohmann::json present(const ScoredList& list) const;

  nlohmann::json handleSearch(const nlohmann::json& body) const;
  nlohmann::json handleVisualSearch(const nlohmann::json& body) const;
  nlohmann::json handleTextSearch(const nlohmann::json& body) const;
  nlohmann::json handleFuse(const nlohmann::json& body) const;

  /// Starts an asynchronous indexing job writing `indexRoot/name`. Body:
  /// {name, config, images:[records] | imagesFile, workers?, shardSize?}.
  /// Throws DuplicateId when the name is taken or being built.
  std::string submitIndexJob(const nlohmann::json& body);
  /// {id, name, status: running|done|failed, report?, error?}; throws
  /// IndexNotFound for unknown ids.
  nlohmann::json jobStatus(const std::string& id) const;
  /// Blocks until the job leaves the running state.
  void waitForJob(const std::string& id);

 private:
  struct Job;
  std::vector<std::shared_ptr<const VisualIndex>> selectIndices(const ApiQuery& query) const;
  std::shared_ptr<const TextIndex> textIndexFor(const std::vector<std::string>& names) const;
  const ImageRecord* findRecord(const std::string& imageId, const std::vector<std::string>& names) const;
  std::vector<std::string> resolvedNames(const ApiQuery& query) const;

  std::filesystem::path indexRoot_;
  SearchDefaults defaults_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const VisualIndex>> indices_;
  mutable std::map<std::string, std::shared_ptr<const TextIndex>> textCache_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::size_t nextJob_ = 1;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
};

/// HTTP wrapper over an Engine. Request logs go to stderr as JSON lines.
class Server {
 public:
  Server(Engine& engine, ServerOptions options);
  ~Server();
  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace imgseek
