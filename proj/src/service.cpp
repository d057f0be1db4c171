#include "imgseek/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <set>

namespace imgseek {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void badRequest(const std::string& what) { throw Error(ErrorCode::InvalidParameter, what); }

QueryExample parseExample(const json& item) {
  if (item.is_string()) return item.get<std::string>();
  if (!item.is_object()) badRequest("query examples must be imageId strings or objects");
  if (item.contains("imageId")) return item.at("imageId").get<std::string>();
  if (item.contains("image")) {
    const auto bytes = base64Decode(item.at("image").get<std::string>());
    return decodeImage(bytes);
  }
  badRequest("query example needs \"imageId\" or \"image\"");
}

std::vector<std::string> stringList(const json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return {};
  if (!body.at(key).is_array()) badRequest(std::string("\"") + key + "\" must be an array");
  return body.at(key).get<std::vector<std::string>>();
}

std::set<std::string> captionTerms(const ImageRecord* r, const std::set<std::string>& stopwords) {
  if (!r || !r->caption) return {};
  const auto tokens = tokenize(*r->caption, stopwords);
  return {tokens.begin(), tokens.end()};
}

}  // namespace

ApiQuery parseApiQuery(const json& body) {
  if (!body.is_object()) badRequest("query body must be a JSON object");
  try {
    ApiQuery q;
    for (const char* key : {"positives", "negatives"}) {
      if (!body.contains(key) || body.at(key).is_null()) continue;
      if (!body.at(key).is_array()) badRequest(std::string("\"") + key + "\" must be an array");
      auto& target = std::string(key) == "positives" ? q.positives : q.negatives;
      for (const auto& item : body.at(key)) target.push_back(parseExample(item));
    }
    if (body.contains("text") && !body.at("text").is_null()) {
      auto text = body.at("text").get<std::string>();
      if (text.find_first_not_of(" \t\r\n") != std::string::npos) q.text = std::move(text);
    }
    q.modalities = stringList(body, "modalities");
    q.indexNames = stringList(body, "indexNames");
    if (body.contains("topN")) {
      if (!body.at("topN").is_number_integer()) badRequest("topN must be an integer");
      const auto n = body.at("topN").get<long long>();
      if (n < 1 || n > static_cast<long long>(kMaxTopN)) badRequest("topN must lie in [1, 1000]");
      q.topN = static_cast<std::size_t>(n);
    }
    return q;
  } catch (const json::exception& e) {
    badRequest(std::string("malformed query: ") + e.what());
  }
}

json toJson(const ScoredList& list) {
  json entries = json::array();
  for (const auto& e : list.entries) entries.push_back({{"imageId", e.imageId}, {"score", e.score}});
  return {{"polarity", std::string(toString(list.polarity))}, {"sourceTag", list.sourceTag}, {"entries", entries}};
}

ScoredList scoredListFromJson(const json& j) {
  try {
    ScoredList list;
    const json& entries = j.is_array() ? j : j.at("entries");
    if (j.is_object() && j.contains("polarity")) list.polarity = polarityFromString(j.at("polarity").get<std::string>());
    if (j.is_object()) list.sourceTag = j.value("sourceTag", std::string());
    for (const auto& e : entries) list.entries.push_back({e.at("imageId").get<std::string>(), e.at("score").get<double>()});
    list.sortAndTruncate(list.size());
    if (!list.wellFormed()) badRequest("scored list repeats an imageId");
    return list;
  } catch (const json::exception& e) {
    badRequest(std::string("malformed scored list: ") + e.what());
  }
}

FusionRule fusionRuleFromJson(const json& j) {
  FusionRule rule;
  if (j.is_string()) {
    rule.name = j.get<std::string>();
    return rule;
  }
  try {
    rule.name = j.at("name").get<std::string>();
    rule.weights = j.value("weights", std::vector<double>{});
    rule.c = j.value("c", 60.0);
    rule.normalizeScores = j.value("normalize", true);
  } catch (const json::exception& e) {
    badRequest(std::string("malformed fusion rule: ") + e.what());
  }
  return rule;
}

int httpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::IndexNotFound:
      return 404;
    case ErrorCode::DuplicateId:
      return 409;
    case ErrorCode::DecodeError:
    case ErrorCode::FeatureExtractionFailed:
    case ErrorCode::ImageTooSmall:
      return 422;
    case ErrorCode::Io:
    case ErrorCode::OutputNotWritable:
      return 500;
    default:
      return 400;
  }
}

struct Engine::Job {
  std::string id;
  std::string name;
  std::string status = "running";
  json report;
  std::string error;
  std::jthread thread;
  std::condition_variable done;
};

Engine::Engine(fs::path indexRoot, SearchDefaults defaults) : indexRoot_(std::move(indexRoot)), defaults_(defaults) {
  if (!fs::is_directory(indexRoot_)) return;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(indexRoot_))
    if (e.is_directory() && fs::exists(e.path() / layout::kConfig)) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) registerIndex(d.filename().string(), d);
}

Engine::~Engine() {
  std::vector<std::shared_ptr<Job>> jobs;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, job] : jobs_) jobs.push_back(job);
  }
  for (auto& job : jobs)
    if (job->thread.joinable()) job->thread.join();
}

void Engine::registerIndex(const std::string& name, const fs::path& dir) {
  auto index = VisualIndex::open(dir);
  std::lock_guard lock(mutex_);
  indices_[name] = std::move(index);
  textCache_.clear();
}

std::shared_ptr<const VisualIndex> Engine::index(const std::string& name) const {
  std::lock_guard lock(mutex_);
  auto it = indices_.find(name);
  if (it == indices_.end()) throw Error(ErrorCode::IndexNotFound, "index '" + name + "' is not registered");
  return it->second;
}

std::vector<std::string> Engine::indexNames() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> names;
  for (const auto& [name, _] : indices_) names.push_back(name);
  return names;
}

std::vector<std::string> Engine::resolvedNames(const ApiQuery& query) const {
  std::vector<std::string> names = query.indexNames.empty() ? indexNames() : query.indexNames;
  for (const auto& n : names) index(n);  // IndexNotFound for unknown names
  if (names.empty()) throw Error(ErrorCode::IndexNotFound, "no index is registered");
  return names;
}

std::vector<std::shared_ptr<const VisualIndex>> Engine::selectIndices(const ApiQuery& query) const {
  std::vector<std::shared_ptr<const VisualIndex>> out;
  for (const auto& n : resolvedNames(query)) out.push_back(index(n));
  return out;
}

std::shared_ptr<const TextIndex> Engine::textIndexFor(const std::vector<std::string>& names) const {
  std::string key;
  for (const auto& n : names) key += n + '\n';
  {
    std::lock_guard lock(mutex_);
    auto it = textCache_.find(key);
    if (it != textCache_.end()) return it->second;
  }
  std::vector<ImageRecord> records;
  std::set<std::string> seen;
  for (const auto& n : names)
    for (const auto& r : index(n)->records())
      if (seen.insert(r.imageId).second) records.push_back(r);
  auto text = std::make_shared<const TextIndex>(indexCaptions(records));
  std::lock_guard lock(mutex_);
  textCache_[key] = text;
  return text;
}

const ImageRecord* Engine::findRecord(const std::string& imageId, const std::vector<std::string>& names) const {
  for (const auto& n : names)
    if (const ImageRecord* r = index(n)->record(imageId)) return r;
  return nullptr;
}

ScoredList Engine::textSearch(const ApiQuery& query, std::size_t depth) const {
  if (!query.text) throw Error(ErrorCode::EmptyInput, "text search needs a text query");
  const auto names = resolvedNames(query);
  const auto text = textIndexFor(names);

  std::set<std::string> keep;
  for (const auto& t : tokenize(*query.text, text->stopwords())) keep.insert(t);
  for (const auto& p : query.positives)
    if (const auto* id = std::get_if<std::string>(&p)) keep.merge(captionTerms(findRecord(*id, names), text->stopwords()));
  std::set<std::string> negated;
  for (const auto& n : query.negatives)
    if (const auto* id = std::get_if<std::string>(&n))
      for (const auto& t : captionTerms(findRecord(*id, names), text->stopwords()))
        if (!keep.count(t)) negated.insert(t);

  ScoredList list = searchText(*query.text, *text, text->documents(), negated);
  if (!query.modalities.empty()) {
    std::erase_if(list.entries, [&](const ScoredEntry& e) {
      const ImageRecord* r = findRecord(e.imageId, names);
      return !r || !r->modality ||
             std::find(query.modalities.begin(), query.modalities.end(), *r->modality) == query.modalities.end();
    });
  }
  list.sortAndTruncate(depth);
  return list;
}

std::vector<ScoredList> Engine::visualLists(const ApiQuery& query, const std::optional<std::vector<std::string>>& shortlist,
                                            std::size_t depth) const {
  if (query.positives.empty()) throw Error(ErrorCode::EmptyInput, "visual search needs at least one positive example");
  const auto indices = selectIndices(query);
  QuerySpec spec;
  spec.positives = query.positives;
  spec.negatives = query.negatives;
  spec.text = query.text;
  spec.modalities = query.modalities;
  spec.topN = depth;
  spec.shortlist = shortlist;

  std::vector<ScoredList> lists(indices.size());
  std::vector<std::exception_ptr> errors(indices.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < indices.size(); ++i) {
      pool.emplace_back([&, i] {
        try {
          lists[i] = searchModalityFiltered(spec, *indices[i], defaults_.rocchio);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return lists;
}

ScoredList Engine::visualSearch(const ApiQuery& query, const std::optional<std::vector<std::string>>& shortlist,
                                std::size_t depth) const {
  auto lists = visualLists(query, shortlist, depth);
  if (lists.size() == 1) {
    lists.front().sortAndTruncate(query.topN);
    return lists.front();
  }
  return fuseMultimodal({}, lists, query.topN);
}

ScoredList Engine::search(const ApiQuery& query) const {
  if (query.positives.empty() && !query.text)
    throw Error(ErrorCode::EmptyInput, "a query needs positive examples or text");
  if (!query.text) return visualSearch(query, std::nullopt, defaults_.visualDepth);

  ScoredList text = textSearch(query, defaults_.textShortlist);
  if (query.positives.empty()) {
    text.sortAndTruncate(query.topN);
    return text;
  }
  const auto lists = visualLists(query, text.ids(), defaults_.visualDepth);
  return fuseMultimodal(text, lists, query.topN);
}

json Engine::present(const ScoredList& list) const {
  const auto names = indexNames();
  json rows = json::array();
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    const auto& e = list.entries[i];
    const ImageRecord* r = findRecord(e.imageId, names);
    auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
    rows.push_back({{"imageId", e.imageId},
                    {"score", e.score},
                    {"rank", i + 1},
                    {"uri", r ? json(r->uri) : json(nullptr)},
                    {"caption", r ? opt(r->caption) : json(nullptr)},
                    {"modality", r ? opt(r->modality) : json(nullptr)},
                    {"articleUri", r ? opt(r->articleUri) : json(nullptr)}});
  }
  return {{"results", rows}, {"polarity", std::string(toString(list.polarity))}};
}

json Engine::handleSearch(const json& body) const { return present(search(parseApiQuery(body))); }

json Engine::handleVisualSearch(const json& body) const {
  const ApiQuery q = parseApiQuery(body);
  return present(visualSearch(q, std::nullopt, defaults_.visualDepth));
}

json Engine::handleTextSearch(const json& body) const {
  const ApiQuery q = parseApiQuery(body);
  return present(textSearch(q, q.topN));
}

json Engine::handleFuse(const json& body) const {
  if (!body.is_object() || !body.contains("lists") || !body.at("lists").is_array())
    badRequest("fuse body needs a \"lists\" array");
  std::vector<ScoredList> lists;
  for (const auto& l : body.at("lists")) lists.push_back(scoredListFromJson(l));
  const FusionRule rule = body.contains("rule") ? fusionRuleFromJson(body.at("rule")) : FusionRule{};
  std::size_t topN = kDefaultTopN;
  if (body.contains("topN")) {
    const auto n = body.at("topN").get<long long>();
    if (n < 1 || n > static_cast<long long>(kMaxTopN)) badRequest("topN must lie in [1, 1000]");
    topN = static_cast<std::size_t>(n);
  }
  return present(fuse(lists, rule, topN));
}

std::string Engine::submitIndexJob(const json& body) {
  if (!body.is_object()) badRequest("index job body must be a JSON object");
  std::string name;
  IndexJob job;
  try {
    name = body.at("name").get<std::string>();
    if (name.empty() || name.find_first_of("/\\") != std::string::npos || name == "." || name == "..")
      badRequest("index name must be a plain directory name");
    job.config = configFromJson(body.at("config"));
    job.configDir = indexRoot_;
    job.imageRoot = indexRoot_;
    if (body.contains("images")) {
      for (const auto& r : body.at("images")) job.images.push_back(recordFromJson(r));
    } else if (body.contains("imagesFile")) {
      const fs::path file = indexRoot_ / body.at("imagesFile").get<std::string>();
      job.images = loadRecords(file);
      job.imageRoot = file.parent_path();
    } else {
      badRequest("index job needs \"images\" or \"imagesFile\"");
    }
    job.mode.workers = body.value("workers", 0);
    job.mode.shardSize = body.value("shardSize", std::size_t{64});
  } catch (const json::exception& e) {
    badRequest(std::string("malformed index job: ") + e.what());
  }
  job.outputDir = indexRoot_ / name;

  std::lock_guard lock(mutex_);
  if (indices_.count(name)) throw Error(ErrorCode::DuplicateId, "index '" + name + "' already exists");
  for (const auto& [id, j] : jobs_)
    if (j->name == name && j->status != "failed") throw Error(ErrorCode::DuplicateId, "index '" + name + "' is being built");
  auto record = std::make_shared<Job>();
  record->id = "job-" + std::to_string(nextJob_++);
  record->name = name;
  jobs_[record->id] = record;
  record->thread = std::jthread([this, record, job = std::move(job)] {
    json report;
    std::string error;
    try {
      report = runIndex(job).toJson();
      registerIndex(record->name, job.outputDir);
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard done(mutex_);
    record->report = std::move(report);
    record->error = std::move(error);
    record->status = record->error.empty() ? "done" : "failed";
    record->done.notify_all();
  });
  return record->id;
}

json Engine::jobStatus(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::IndexNotFound, "no indexing job '" + id + "'");
  const Job& j = *it->second;
  json out{{"id", j.id}, {"name", j.name}, {"status", j.status}};
  if (!j.report.is_null()) out["report"] = j.report;
  if (!j.error.empty()) out["error"] = j.error;
  return out;
}

void Engine::waitForJob(const std::string& id) {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::IndexNotFound, "no indexing job '" + id + "'");
  auto job = it->second;
  job->done.wait(lock, [&] { return job->status != "running"; });
}

}  // namespace imgseek
