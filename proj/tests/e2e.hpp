#pragma once

#include "helpers.hpp"

#include "imgseek/fusor.hpp"
#include "imgseek/seeker.hpp"
#include "imgseek/textsearch.hpp"

#include <set>

namespace testing {

/// Captioned corpus written to disk as PNGs under `root/images`, with one
/// index per global descriptor under `root/<name>`.
struct CaptionedFixture {
  TempDir tmp;
  imgseek::ExperimentCorpus corpus;
  fs::path root;
  std::vector<std::string> names;

  CaptionedFixture(int classes, int perClass, int size,
                   const std::vector<std::pair<std::string, std::string>>& indices = {{"hsv", "hsv-hist"},
                                                                                        {"layout", "color-layout"}})
      : corpus(imgseek::generateSyntheticCorpus({classes, perClass, size, 1, 23})), root(tmp / "root") {
    fs::create_directories(root / "images");
    std::vector<imgseek::ImageRecord> records;
    for (auto& li : corpus.images) {
      li.record.uri = "images/" + li.record.imageId + ".png";
      imgseek::savePng(li.image, root / li.record.uri);
      records.push_back(li.record);
    }
    for (const auto& [name, representation] : indices) {
      imgseek::IndexJob job;
      job.images = records;
      job.config = globalConfig(representation, "histogram-intersection");
      if (representation == "color-layout") job.config.distanceDefault = "euclidean";
      job.outputDir = root / name;
      job.imageRoot = root;
      imgseek::runIndex(job);
      names.push_back(name);
    }
  }
};

struct OracleQuery {
  std::string text;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  std::vector<std::string> modalities;
  std::size_t topN = 30;
};

/// Hand composition of the multimodal pipeline from the individual
/// components: caption search, text shortlist, per-index Rocchio with
/// modality filtering, combMNZ across indices, rrf with the text list.
inline imgseek::ScoredList oracleSearch(const fs::path& root, const std::vector<std::string>& names,
                                        const OracleQuery& q, std::size_t textDepth = 1000,
                                        std::size_t visualDepth = 1000) {
  using namespace imgseek;
  std::vector<std::shared_ptr<const VisualIndex>> indices;
  for (const auto& n : names) indices.push_back(VisualIndex::open(root / n));

  std::vector<ImageRecord> records;
  std::map<std::string, ImageRecord> byId;
  for (const auto& idx : indices)
    for (const auto& r : idx->records())
      if (byId.emplace(r.imageId, r).second) records.push_back(r);
  const TextIndex text = indexCaptions(records);

  auto terms = [&](const std::string& id) {
    const auto& r = byId.at(id);
    const auto t = tokenize(r.caption.value_or(""), defaultStopwords());
    return std::set<std::string>(t.begin(), t.end());
  };
  std::set<std::string> keep;
  for (const auto& t : tokenize(q.text, defaultStopwords())) keep.insert(t);
  for (const auto& p : q.positives) keep.merge(terms(p));
  std::set<std::string> negated;
  for (const auto& n : q.negatives)
    for (const auto& t : terms(n))
      if (!keep.count(t)) negated.insert(t);

  auto modalityOk = [&](const std::string& id) {
    if (q.modalities.empty()) return true;
    const auto& m = byId.at(id).modality;
    return m && std::find(q.modalities.begin(), q.modalities.end(), *m) != q.modalities.end();
  };

  ScoredList textList = searchText(q.text, text, text.documents(), negated);
  std::erase_if(textList.entries, [&](const ScoredEntry& e) { return !modalityOk(e.imageId); });
  textList.sortAndTruncate(textDepth);
  if (q.positives.empty()) {
    textList.sortAndTruncate(q.topN);
    return textList;
  }

  std::vector<ScoredList> visual;
  for (const auto& idx : indices) {
    QuerySpec spec;
    for (const auto& p : q.positives) spec.positives.push_back(p);
    for (const auto& n : q.negatives) spec.negatives.push_back(n);
    spec.topN = records.size();
    spec.shortlist = textList.ids();
    ScoredList l = searchRocchio(spec, *idx, RocchioParams{0.0, 0.6, 0.4});
    std::erase_if(l.entries, [&](const ScoredEntry& e) { return !modalityOk(e.imageId); });
    l.sortAndTruncate(visualDepth);
    visual.push_back(std::move(l));
  }
  std::size_t depth = 0;
  for (const auto& l : visual) depth += l.size();
  FusionRule mnz;
  mnz.name = "combMNZ";
  const ScoredList combined = fuse(visual, mnz, std::max<std::size_t>(depth, 1));
  if (textList.empty()) {
    ScoredList out = combined;
    out.sortAndTruncate(q.topN);
    return out;
  }
  FusionRule rrf;
  rrf.name = "rrf";
  rrf.c = 60;
  return fuse({textList, combined}, rrf, q.topN);
}

/// Ids and scores of a presented result body.
inline imgseek::ScoredList fromPresented(const nlohmann::json& body) {
  imgseek::ScoredList l;
  l.polarity = imgseek::polarityFromString(body.at("polarity").get<std::string>());
  for (const auto& r : body.at("results")) l.entries.push_back({r.at("imageId"), r.at("score")});
  return l;
}

}  // namespace testing
