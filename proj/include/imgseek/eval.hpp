#pragma once

#include "imgseek/core.hpp"
#include "imgseek/extractor.hpp"
#include "imgseek/image.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace imgseek {

/// topicId -> relevant imageIds.
using Qrels = std::map<std::string, std::set<std::string>>;

struct RunResult {
  std::map<std::string, ScoredList> topics;
  std::string descriptor;  // e.g. "sift16/bovw/k20/histogram-intersection"
};

/// Mean over relevant items found in `ranked` of precision at their rank,
/// divided by |relevant|; relevant items never retrieved contribute 0.
/// Throws EmptyInput on an empty relevant set.
double averagePrecision(const ScoredList& ranked, const std::set<std::string>& relevant);

struct MapSummary {
  double map = 0.0;
  std::size_t scoredTopics = 0;
  // Run topics with no (or empty) judgments; excluded from the mean.
  std::size_t unjudgedTopics = 0;
  std::map<std::string, double> perTopic;
};

MapSummary meanAveragePrecision(const RunResult& run, const Qrels& qrels);

/// `topicId 0 imageId relevance`; relevance > 0 counts as relevant.
Qrels readQrels(const std::filesystem::path& path);
void writeQrels(const Qrels& qrels, const std::filesystem::path& path);
/// `topicId Q0 imageId rank score tag`; lists come back sorted by score.
RunResult readRun(const std::filesystem::path& path);
void writeRun(const RunResult& run, const std::filesystem::path& path, const std::string& tag = "imgseek");

struct LabeledImage {
  ImageRecord record;
  Image image;
  std::string label;
};

struct SyntheticCorpusOptions {
  int classes = 6;
  int perClass = 8;
  int size = 64;
  int queriesPerTopic = 2;
  std::uint64_t seed = 7;
};

/// Images, one topic per class, and its judgments.
struct ExperimentCorpus {
  std::vector<LabeledImage> images;
  std::map<std::string, std::vector<std::string>> topicQueries;  // topicId -> example imageIds
  Qrels qrels;

  const LabeledImage* find(const std::string& imageId) const;
};

/// Classes differ in palette, stripe orientation and frequency; members vary
/// in phase, jitter and noise. Captions and modality tags are filled in.
ExperimentCorpus generateSyntheticCorpus(const SyntheticCorpusOptions& options);
/// Labeled folder: one sub-directory per class holding PNG/JPEG files.
ExperimentCorpus loadLabeledFolder(const std::filesystem::path& root, int queriesPerTopic = 2);

/// A named local-feature configuration on the feature axis.
struct FeaturePreset {
  std::string name;
  ExtractorParams extractor;
};
std::vector<FeaturePreset> defaultFeaturePresets();

struct ExperimentGrid {
  std::vector<FeaturePreset> features = defaultFeaturePresets();
  std::vector<int> vocabSizes{10, 20, 30, 40, 50, 100};
  std::vector<std::string> metrics{"histogram-intersection", "euclidean", "cosine", "chi2"};
  std::vector<std::string> representations{"bovw", "spm-bovw", "grid-bovw", "vlad"};
  std::vector<int> representationVocabSizes{10, 20};
  std::vector<std::string> fusionRules{"combMNZ", "combSUM", "rrf", "borda"};
  std::vector<std::string> globalDescriptors{"color-layout", "hsv-hist", "hog-mini", "gabor"};
  std::size_t maxTrainingSamples = 4000;
  std::uint64_t seed = 7;
  int workers = 1;
};

/// Row label plus one value per column; NaN marks an undefined cell.
struct ResultTable {
  std::string name;
  std::vector<std::string> columns;  // first entry labels the row axis
  std::vector<std::pair<std::string, std::vector<double>>> rows;
};

void writeCsv(const ResultTable& table, const std::filesystem::path& path);

struct ExperimentTables {
  ResultTable features;         // features x metrics, averaged over vocabSizes
  ResultTable fusion;           // fusion rule over the best run per feature
  ResultTable representations;  // features x representations
  ResultTable descriptors;      // image representations x metrics
};

/// Runs every grid cell through the real index/search pipeline under
/// `workDir` and writes table1.csv .. table4.csv into `outDir`.
/// Throws CorpusTooSmall or MissingVocabulary.
ExperimentTables runMatrixExperiment(const ExperimentCorpus& corpus, const ExperimentGrid& grid,
                                     const std::filesystem::path& outDir);

}  // namespace imgseek
