#pragma once

#include "imgseek/core.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace imgseek {

/// The built-in 50-word English list (also shipped as data/stopwords.txt).
const std::set<std::string>& defaultStopwords();
/// One word per line; blank lines and '#' comments ignored.
std::set<std::string> loadStopwords(const std::filesystem::path& path);

/// Lowercase, split on anything that is not [a-z0-9], drop stopwords.
std::vector<std::string> tokenize(std::string_view text, const std::set<std::string>& stopwords);

struct Posting {
  std::string imageId;
  int termFrequency = 0;

  bool operator==(const Posting&) const = default;
};

/// Inverted caption index with TF-IDF document vectors.
class TextIndex {
 public:
  std::size_t documents() const { return docLength_.size(); }
  std::size_t skipped() const { return skipped_; }
  const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
  const std::vector<Posting>* postings(const std::string& term) const;
  int documentLength(const std::string& imageId) const;
  /// TF-IDF weight of `term` in the document, 0 when absent.
  double weight(const std::string& term, const std::string& imageId) const;
  /// Euclidean norm of the document's TF-IDF vector.
  double norm(const std::string& imageId) const;
  bool contains(const std::string& imageId, const std::string& term) const;
  const std::set<std::string>& stopwords() const { return stopwords_; }

 private:
  friend TextIndex indexCaptions(const std::vector<ImageRecord>&, const std::set<std::string>&);

  std::map<std::string, std::vector<Posting>> postings_;  // each sorted by imageId
  std::map<std::string, int> docLength_;
  std::map<std::string, double> docNorm_;
  std::set<std::string> stopwords_;
  std::size_t skipped_ = 0;
};

/// Records without a caption (or with only stopwords) are skipped and counted.
/// Throws DuplicateId.
TextIndex indexCaptions(const std::vector<ImageRecord>& records,
                        const std::set<std::string>& stopwords = defaultStopwords());

/// Cosine between TF-IDF query and document vectors; documents containing
/// any negated term are dropped outright. Only documents sharing a weighted
/// term with the query are returned.
ScoredList searchText(std::string_view query, const TextIndex& index, std::size_t topN,
                      const std::set<std::string>& negatedTerms = {});

/// combMNZ across the visual lists, then rrf with the text list when it is
/// non-empty. No visual lists returns the text list.
ScoredList fuseMultimodal(const ScoredList& textList, const std::vector<ScoredList>& visualLists, std::size_t topN);

}  // namespace imgseek
