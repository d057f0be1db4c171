#include "imgseek/seeker.hpp"

#include "imgseek/indexer.hpp"
#include "imgseek/vocabulary.hpp"

#include <algorithm>
#include <thread>

namespace imgseek {

namespace fs = std::filesystem;

Vector rocchioMerge(const Vector& original, const std::vector<Vector>& relevant,
                    const std::vector<Vector>& nonrelevant, const RocchioParams& params) {
  auto check = [&](const Vector& v) {
    if (v.size() != original.size())
      throw Error(ErrorCode::DimensionMismatch, "Rocchio input of length " + std::to_string(v.size()) +
                                                    " against query of length " + std::to_string(original.size()));
  };
  Vector q = params.alpha * original;
  if (!relevant.empty()) {
    Vector sum = Vector::Zero(original.size());
    for (const auto& d : relevant) {
      check(d);
      sum += d;
    }
    q += (params.beta / static_cast<double>(relevant.size())) * sum;
  }
  if (!nonrelevant.empty()) {
    Vector sum = Vector::Zero(original.size());
    for (const auto& d : nonrelevant) {
      check(d);
      sum += d;
    }
    q -= (params.gamma / static_cast<double>(nonrelevant.size())) * sum;
  }
  return q;
}

std::shared_ptr<const VisualIndex> VisualIndex::open(const fs::path& dir) {
  if (!fs::is_regular_file(dir / layout::kConfig))
    throw Error(ErrorCode::IndexNotFound, "no index at " + dir.string());
  auto index = std::shared_ptr<VisualIndex>(new VisualIndex());
  index->dir_ = dir;
  index->config_ = loadConfig(dir / layout::kConfig);
  index->pipeline_ = std::make_unique<Pipeline>(Pipeline::fromConfig(index->config_, dir));
  index->raw_ = openStorer(index->config_.storer, dir);
  if (index->config_.weighting.kind != "none") {
    index->weighted_ = openStorer(weightedStoreParams(index->config_.storer), dir);
    index->stats_ = loadStats(dir / layout::kStats);
  }
  if (index->config_.ann && fs::exists(dir / layout::kLsh)) index->lsh_ = LshIndex::load(dir / layout::kLsh);
  if (fs::exists(dir / layout::kRecords)) index->records_ = loadRecords(dir / layout::kRecords);
  for (std::size_t i = 0; i < index->records_.size(); ++i) index->recordOf_.emplace(index->records_[i].imageId, i);
  return index;
}

const ImageRecord* VisualIndex::record(const std::string& imageId) const {
  auto it = recordOf_.find(imageId);
  return it == recordOf_.end() ? nullptr : &records_[it->second];
}

Vector VisualIndex::rawVector(const QueryExample& example) const {
  if (const auto* id = std::get_if<std::string>(&example)) {
    auto v = raw_->get(*id);
    if (!v) throw Error(ErrorCode::UnknownImage, "image '" + *id + "' is not in index " + dir_.string());
    return *v;
  }
  try {
    return pipeline_->describe(std::get<Image>(example)).values;
  } catch (const Error& e) {
    throw Error(ErrorCode::FeatureExtractionFailed, std::string("query image: ") + e.what());
  }
}

Vector VisualIndex::weight(const Vector& raw) const {
  if (!stats_) return raw;
  return tfidfWeight({raw_->featureId(), raw, false}, *stats_).values;
}

Vector VisualIndex::finalizeQuery(const Vector& merged, const Metric& metric) const {
  if (config_.weighting.kind == "frequent-items")
    return indicatorVector(selectFrequentItems(merged, config_.weighting.k), merged.size());
  if (metric.requiresNonNegative) return merged.cwiseMax(0.0);
  return merged;
}

const Metric& VisualIndex::metricFor(const QuerySpec& query) const {
  return metricByName(query.metricOverride.value_or(config_.distanceDefault));
}

namespace {

ScoredList rankVector(const Vector& q, const QuerySpec& query, const VisualIndex& index, const Metric& metric,
                      std::size_t topN) {
  std::vector<std::string> annShortlist;
  const std::vector<std::string>* shortlist = nullptr;
  if (query.shortlist) {
    shortlist = &*query.shortlist;
  } else if (index.lsh()) {
    annShortlist = index.lsh()->shortlist(q);
    shortlist = &annShortlist;
  }
  return index.searchStore().scan(q, metric, shortlist, topN);
}

void requireQuery(const QuerySpec& query) {
  if (query.positives.empty()) throw Error(ErrorCode::EmptyInput, "visual search needs at least one positive example");
  if (query.topN < 1) throw Error(ErrorCode::InvalidParameter, "topN must be >= 1");
}

}  // namespace

ScoredList searchRocchio(const QuerySpec& query, const VisualIndex& index, const RocchioParams& params) {
  requireQuery(query);
  const Metric& metric = index.metricFor(query);
  std::vector<Vector> relevant, nonrelevant;
  for (const auto& p : query.positives) relevant.push_back(index.weight(index.rawVector(p)));
  for (const auto& n : query.negatives) nonrelevant.push_back(index.weight(index.rawVector(n)));
  Vector original = Vector::Zero(relevant.front().size());
  for (const auto& r : relevant) original += r;
  original /= static_cast<double>(relevant.size());
  const Vector q = index.finalizeQuery(rocchioMerge(original, relevant, nonrelevant, params), metric);
  return rankVector(q, query, index, metric, query.topN);
}

ScoredList searchLateFusion(const QuerySpec& query, const VisualIndex& index, const FusionRule& rule,
                            std::size_t listDepth) {
  requireQuery(query);
  const Metric& metric = index.metricFor(query);
  std::vector<ScoredList> lists(query.positives.size());
  std::vector<std::exception_ptr> errors(query.positives.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < query.positives.size(); ++i) {
      pool.emplace_back([&, i] {
        try {
          const Vector q = index.finalizeQuery(index.weight(index.rawVector(query.positives[i])), metric);
          lists[i] = rankVector(q, query, index, metric, std::max(listDepth, query.topN));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return fuse(lists, rule, query.topN);
}

ScoredList filterByModality(const ScoredList& list, const VisualIndex& index,
                            const std::vector<std::string>& modalities) {
  if (modalities.empty()) return list;
  ScoredList out = list;
  std::erase_if(out.entries, [&](const ScoredEntry& e) {
    const ImageRecord* r = index.record(e.imageId);
    return !r || !r->modality || std::find(modalities.begin(), modalities.end(), *r->modality) == modalities.end();
  });
  return out;
}

ScoredList searchModalityFiltered(const QuerySpec& query, const VisualIndex& index, const RocchioParams& params) {
  QuerySpec everything = query;
  everything.topN = std::max<std::size_t>(1, index.searchStore().count());
  ScoredList out = filterByModality(searchRocchio(everything, index, params), index, query.modalities);
  out.sortAndTruncate(query.topN);
  return out;
}

}  // namespace imgseek
