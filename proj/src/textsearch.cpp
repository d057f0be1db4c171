#include "imgseek/textsearch.hpp"

#include "imgseek/fusor.hpp"
#include "imgseek/stopwords_data.hpp"
#include "imgseek/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace imgseek {

namespace {

std::set<std::string> parseStopwords(std::istream& in) {
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const auto end = line.find_last_not_of(" \t\r");
    std::string w = line.substr(begin, end - begin + 1);
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
    words.insert(std::move(w));
  }
  return words;
}

std::map<std::string, int> termCounts(const std::vector<std::string>& tokens) {
  std::map<std::string, int> counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

}  // namespace

const std::set<std::string>& defaultStopwords() {
  static const std::set<std::string> words = [] {
    std::istringstream in{std::string(detail::kStopwordsText)};
    return parseStopwords(in);
  }();
  return words;
}

std::set<std::string> loadStopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open stopword list " + path.string());
  return parseStopwords(in);
}

std::vector<std::string> tokenize(std::string_view text, const std::set<std::string>& stopwords) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stopwords.count(current)) tokens.push_back(current);
    current.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c))
      current.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  return tokens;
}

const std::vector<Posting>* TextIndex::postings(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

int TextIndex::documentLength(const std::string& imageId) const {
  auto it = docLength_.find(imageId);
  return it == docLength_.end() ? 0 : it->second;
}

bool TextIndex::contains(const std::string& imageId, const std::string& term) const {
  const auto* list = postings(term);
  if (!list) return false;
  return std::binary_search(list->begin(), list->end(), Posting{imageId, 0},
                            [](const Posting& a, const Posting& b) { return a.imageId < b.imageId; });
}

double TextIndex::norm(const std::string& imageId) const {
  auto it = docNorm_.find(imageId);
  return it == docNorm_.end() ? 0.0 : it->second;
}

double TextIndex::weight(const std::string& term, const std::string& imageId) const {
  const auto* list = postings(term);
  if (!list) return 0.0;
  auto it = std::lower_bound(list->begin(), list->end(), imageId,
                             [](const Posting& p, const std::string& id) { return p.imageId < id; });
  if (it == list->end() || it->imageId != imageId) return 0.0;
  return tfidfTerm(it->termFrequency, documentLength(imageId), static_cast<double>(list->size()),
                   static_cast<double>(documents()));
}

TextIndex indexCaptions(const std::vector<ImageRecord>& records, const std::set<std::string>& stopwords) {
  TextIndex index;
  index.stopwords_ = stopwords;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.imageId).second) throw Error(ErrorCode::DuplicateId, "caption for '" + r.imageId + "' repeats");
    if (!r.caption) {
      ++index.skipped_;
      continue;
    }
    const auto tokens = tokenize(*r.caption, stopwords);
    if (tokens.empty()) {
      ++index.skipped_;
      continue;
    }
    index.docLength_[r.imageId] = static_cast<int>(tokens.size());
    for (const auto& [term, tf] : termCounts(tokens)) index.postings_[term].push_back({r.imageId, tf});
  }
  for (auto& [term, list] : index.postings_)
    std::sort(list.begin(), list.end(), [](const Posting& a, const Posting& b) { return a.imageId < b.imageId; });

  const auto n = static_cast<double>(index.documents());
  for (const auto& [term, list] : index.postings_) {
    for (const auto& p : list) {
      const double w = tfidfTerm(p.termFrequency, index.docLength_.at(p.imageId), static_cast<double>(list.size()), n);
      index.docNorm_[p.imageId] += w * w;
    }
  }
  for (auto& [id, norm] : index.docNorm_) norm = std::sqrt(norm);
  return index;
}

ScoredList searchText(std::string_view query, const TextIndex& index, std::size_t topN,
                      const std::set<std::string>& negatedTerms) {
  ScoredList out;
  out.polarity = Polarity::Similarity;
  out.sourceTag = "text";
  const auto tokens = tokenize(query, index.stopwords());
  if (tokens.empty() || index.documents() == 0) return out;

  const auto counts = termCounts(tokens);
  const auto n = static_cast<double>(index.documents());
  std::map<std::string, double> queryWeight;
  double queryNorm = 0.0;
  for (const auto& [term, tf] : counts) {
    const auto* list = index.postings(term);
    if (!list) continue;
    const double w = tfidfTerm(tf, static_cast<double>(tokens.size()), static_cast<double>(list->size()), n);
    queryWeight[term] = w;
    queryNorm += w * w;
  }
  queryNorm = std::sqrt(queryNorm);
  if (queryNorm == 0.0) return out;

  std::map<std::string, double> dot;
  for (const auto& [term, qw] : queryWeight) {
    if (qw == 0.0) continue;
    for (const auto& p : *index.postings(term)) dot[p.imageId] += qw * index.weight(term, p.imageId);
  }
  std::set<std::string> negated;
  for (const auto& t : negatedTerms)
    for (auto& tok : tokenize(t, {})) negated.insert(std::move(tok));

  for (const auto& [id, d] : dot) {
    if (d <= 0.0) continue;
    if (std::any_of(negated.begin(), negated.end(), [&](const std::string& t) { return index.contains(id, t); }))
      continue;
    out.entries.push_back({id, d / (queryNorm * index.norm(id))});
  }
  out.sortAndTruncate(topN);
  return out;
}

ScoredList fuseMultimodal(const ScoredList& textList, const std::vector<ScoredList>& visualLists, std::size_t topN) {
  if (visualLists.empty()) {
    ScoredList out = textList;
    out.sortAndTruncate(topN);
    return out;
  }
  std::size_t depth = 0;
  for (const auto& l : visualLists) depth += l.size();
  ScoredList visual = fuse(visualLists, FusionRule{"combMNZ", {}, 60.0, true}, std::max<std::size_t>(depth, 1));
  if (textList.empty()) {
    visual.sortAndTruncate(topN);
    return visual;
  }
  return fuse({textList, visual}, FusionRule{"rrf", {}, 60.0, true}, topN);
}

}  // namespace imgseek
