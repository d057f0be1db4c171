#include "imgseek/eval.hpp"

#include "imgseek/fusor.hpp"
#include "imgseek/indexer.hpp"
#include "imgseek/seeker.hpp"
#include "imgseek/vocabulary.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace imgseek {

namespace fs = std::filesystem;

double averagePrecision(const ScoredList& ranked, const std::set<std::string>& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::EmptyInput, "average precision needs a non-empty relevant set");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
    if (!relevant.count(ranked.entries[i].imageId)) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(relevant.size());
}

MapSummary meanAveragePrecision(const RunResult& run, const Qrels& qrels) {
  MapSummary s;
  double total = 0.0;
  for (const auto& [topic, list] : run.topics) {
    auto it = qrels.find(topic);
    if (it == qrels.end() || it->second.empty()) {
      ++s.unjudgedTopics;
      continue;
    }
    const double ap = averagePrecision(list, it->second);
    s.perTopic[topic] = ap;
    total += ap;
    ++s.scoredTopics;
  }
  s.map = s.scoredTopics ? total / static_cast<double>(s.scoredTopics) : 0.0;
  return s;
}

namespace {

std::string formatNumber(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

Qrels readQrels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open qrels " + path.string());
  Qrels qrels;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::istringstream fields(line);
    std::string topic, iter, doc;
    double rel = 0;
    if (!(fields >> topic)) continue;
    if (!(fields >> iter >> doc >> rel))
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineNo) + ": expected 'topic 0 imageId rel'");
    auto& set = qrels[topic];
    if (rel > 0) set.insert(doc);
  }
  return qrels;
}

void writeQrels(const Qrels& qrels, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& [topic, docs] : qrels)
    for (const auto& d : docs) out << topic << " 0 " << d << " 1\n";
}

RunResult readRun(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open run " + path.string());
  RunResult run;
  std::map<std::string, std::set<std::string>> seen;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::istringstream fields(line);
    std::string topic, q0, doc, tag;
    long rank = 0;
    double score = 0;
    if (!(fields >> topic)) continue;
    if (!(fields >> q0 >> doc >> rank >> score))
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineNo) +
                                     ": expected 'topic Q0 imageId rank score tag'");
    if (fields >> tag && run.descriptor.empty()) run.descriptor = tag;
    if (!seen[topic].insert(doc).second)
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineNo) + ": '" + doc + "' repeats in topic " + topic);
    auto& list = run.topics[topic];
    list.polarity = Polarity::Similarity;
    list.sourceTag = path.filename().string();
    list.entries.push_back({doc, score});
  }
  for (auto& [topic, list] : run.topics) list.sortAndTruncate(list.size());
  return run;
}

void writeRun(const RunResult& run, const fs::path& path, const std::string& tag) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& [topic, list] : run.topics) {
    const ScoredList sim = toSimilarity(list);
    for (std::size_t i = 0; i < sim.entries.size(); ++i)
      out << topic << " Q0 " << sim.entries[i].imageId << ' ' << i + 1 << ' ' << formatNumber(sim.entries[i].score)
          << ' ' << tag << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

const LabeledImage* ExperimentCorpus::find(const std::string& imageId) const {
  for (const auto& li : images)
    if (li.record.imageId == imageId) return &li;
  return nullptr;
}

ExperimentCorpus generateSyntheticCorpus(const SyntheticCorpusOptions& o) {
  static const char* colours[] = {"red", "green", "blue", "yellow", "purple", "orange", "cyan", "pink", "brown", "gray"};
  static const char* patterns[] = {"striped", "banded", "lined"};
  static const char* modalities[] = {"xray", "ct", "mri", "ultrasound"};
  if (o.classes < 1 || o.perClass < 1 || o.size < 8)
    throw Error(ErrorCode::InvalidParameter, "synthetic corpus needs classes, perClass >= 1 and size >= 8");

  ExperimentCorpus corpus;
  for (int c = 0; c < o.classes; ++c) {
    // Palette and texture are drawn once per class.
    std::mt19937_64 classRng(o.seed * 1000003ULL + static_cast<std::uint64_t>(c));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::Vector3d colourA, colourB;
    for (int ch = 0; ch < 3; ++ch) {
      colourA[ch] = 255.0 * unit(classRng);
      colourB[ch] = 255.0 * unit(classRng);
    }
    const double theta = std::numbers::pi * (static_cast<double>(c) + 0.5 * unit(classRng)) / o.classes;
    const double cycles = 2.0 + 4.0 * unit(classRng);

    const std::string topic = "class" + std::to_string(c);
    for (int i = 0; i < o.perClass; ++i) {
      std::mt19937_64 rng(o.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(c * o.perClass + i + 1)));
      std::normal_distribution<double> noise(0.0, 8.0);
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      const double jitter = 0.1 * (unit(rng) - 0.5);
      Image img(o.size, o.size);
      for (int y = 0; y < o.size; ++y) {
        for (int x = 0; x < o.size; ++x) {
          const double u = (x * std::cos(theta + jitter) + y * std::sin(theta + jitter)) / o.size;
          const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * cycles * u + phase);
          Rgb& px = img.at(x, y);
          for (int ch = 0; ch < 3; ++ch) {
            const double v = (1.0 - t) * colourA[ch] + t * colourB[ch] + noise(rng);
            const auto q = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            if (ch == 0) px.r = q;
            if (ch == 1) px.g = q;
            if (ch == 2) px.b = q;
          }
        }
      }
      char id[32];
      std::snprintf(id, sizeof(id), "c%02d_%03d", c, i);
      LabeledImage li;
      li.label = topic;
      li.image = std::move(img);
      li.record.imageId = id;
      li.record.uri = std::string("synthetic/") + id + ".png";
      li.record.caption = std::string(colours[c % 10]) + " " + patterns[c % 3] + " texture group " + topic +
                          " specimen " + std::to_string(i % 5);
      li.record.modality = modalities[c % 4];
      li.record.articleUri = "https://example.org/article/" + topic;
      corpus.qrels[topic].insert(id);
      if (i < o.queriesPerTopic) corpus.topicQueries[topic].push_back(id);
      corpus.images.push_back(std::move(li));
    }
  }
  return corpus;
}

ExperimentCorpus loadLabeledFolder(const fs::path& root, int queriesPerTopic) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::Io, root.string() + " is not a directory");
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) classes.push_back(e.path());
  std::sort(classes.begin(), classes.end());
  ExperimentCorpus corpus;
  for (const auto& dir : classes) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    const std::string topic = dir.filename().string();
    for (std::size_t i = 0; i < files.size(); ++i) {
      LabeledImage li;
      li.label = topic;
      li.record.imageId = topic + "/" + files[i].stem().string();
      li.record.uri = fs::relative(files[i], root).string();
      li.image = loadImage(files[i]);
      corpus.qrels[topic].insert(li.record.imageId);
      if (static_cast<int>(i) < queriesPerTopic) corpus.topicQueries[topic].push_back(li.record.imageId);
      corpus.images.push_back(std::move(li));
    }
  }
  return corpus;
}

std::vector<FeaturePreset> defaultFeaturePresets() {
  return {{"sift16", {"dense-sift", 8, 16}},
          {"sift24", {"dense-sift", 8, 24}},
          {"rootsift16", {"rootsift", 8, 16}},
          {"lab16", {"lab", 8, 16}}};
}

void writeCsv(const ResultTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::OutputNotWritable, "cannot write " + path.string());
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& [label, values] : table.rows) {
    out << label;
    for (double v : values) out << ',' << formatNumber(v);
    out << '\n';
  }
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void runPool(std::size_t tasks, int workers, const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(tasks);
  auto loop = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      try {
        body(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), std::max<std::size_t>(tasks, 1));
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(loop);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct CellKey {
  std::string feature;  // preset name, empty for global descriptors
  std::string representation;
  int k = 0;

  std::string dirName() const {
    return (feature.empty() ? std::string("global") : feature) + "_" + representation + "_k" + std::to_string(k);
  }
  bool operator<(const CellKey& o) const {
    return std::tie(feature, representation, k) < std::tie(o.feature, o.representation, o.k);
  }
};

class MatrixRunner {
 public:
  MatrixRunner(const ExperimentCorpus& corpus, const ExperimentGrid& grid, fs::path work)
      : corpus_(corpus), grid_(grid), work_(std::move(work)) {
    for (const auto& li : corpus.images) byId_.emplace(li.record.imageId, &li);
  }

  void trainCodebooks(const std::set<std::pair<std::string, int>>& needed) {
    std::vector<std::pair<std::string, int>> jobs(needed.begin(), needed.end());
    std::map<std::string, RowMatrix> samples;
    for (const auto& preset : grid_.features) {
      if (std::none_of(jobs.begin(), jobs.end(), [&](const auto& j) { return j.first == preset.name; })) continue;
      samples[preset.name] = trainingSamples(preset.extractor);
    }
    runPool(jobs.size(), grid_.workers, [&](std::size_t t) {
      const auto& [feature, k] = jobs[t];
      const RowMatrix& s = samples.at(feature);
      if (s.rows() < k)
        throw Error(ErrorCode::CorpusTooSmall, feature + " yields " + std::to_string(s.rows()) +
                                                   " local features, fewer than k=" + std::to_string(k));
      KMeansOptions opts;
      opts.k = k;
      opts.seed = grid_.seed;
      Codebook cb = trainKMeans(s, opts, feature).codebook;
      saveCodebook(cb, codebookPath(feature, k));
    });
  }

  /// Indexes one cell and returns a run per metric; a metric that rejects
  /// the cell's vectors yields an empty optional.
  std::map<std::string, std::optional<RunResult>> runCell(const CellKey& key, const std::vector<std::string>& metrics) {
    IndexConfig config;
    if (!key.feature.empty()) {
      config.extractor = preset(key.feature).extractor;
      config.descriptor.vocabRef = codebookPath(key.feature, key.k).filename().string();
    }
    config.descriptor.representation = key.representation;
    config.storer = {"binary", "descriptors.bin"};
    config.distanceDefault = "euclidean";

    IndexJob job;
    job.config = config;
    job.configDir = work_;
    job.outputDir = work_ / key.dirName();
    for (const auto& li : corpus_.images) job.images.push_back(li.record);
    job.loader = [this](const ImageRecord& r) { return byId_.at(r.imageId)->image; };
    const IndexReport report = runIndex(job);
    if (report.failed) throw Error(ErrorCode::FeatureExtractionFailed, report.failures.front().reason);

    const auto index = VisualIndex::open(job.outputDir);
    std::map<std::string, std::optional<RunResult>> runs;
    for (const auto& metric : metrics) {
      RunResult run;
      run.descriptor = key.dirName() + "/" + metric;
      try {
        for (const auto& [topic, examples] : corpus_.topicQueries) {
          QuerySpec q;
          for (const auto& id : examples) q.positives.emplace_back(id);
          q.topN = index->searchStore().count();
          q.metricOverride = metric;
          run.topics[topic] = searchRocchio(q, *index);
        }
        runs[metric] = std::move(run);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InvalidParameter) throw;
        runs[metric] = std::nullopt;
      }
    }
    return runs;
  }

  double map(const std::optional<RunResult>& run) const {
    return run ? meanAveragePrecision(*run, corpus_.qrels).map : kNaN;
  }

 private:
  const FeaturePreset& preset(const std::string& name) const {
    for (const auto& p : grid_.features)
      if (p.name == name) return p;
    throw Error(ErrorCode::UnknownComponent, "feature preset '" + name + "' is not in the grid");
  }

  fs::path codebookPath(const std::string& feature, int k) const {
    return work_ / ("codebook_" + feature + "_k" + std::to_string(k) + ".bin");
  }

  RowMatrix trainingSamples(const ExtractorParams& params) const {
    const auto extractor = makeExtractor(params);
    std::vector<RowMatrix> parts;
    Eigen::Index rows = 0;
    for (const auto& li : corpus_.images) {
      parts.push_back(extractor->extract(li.image).descriptors);
      rows += parts.back().rows();
    }
    RowMatrix all(rows, extractor->dimension());
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      all.middleRows(r, p.rows()) = p;
      r += p.rows();
    }
    const auto cap = static_cast<Eigen::Index>(grid_.maxTrainingSamples);
    if (rows <= cap) return all;
    RowMatrix sampled(cap, all.cols());
    for (Eigen::Index i = 0; i < cap; ++i) sampled.row(i) = all.row(i * rows / cap);
    return sampled;
  }

  const ExperimentCorpus& corpus_;
  const ExperimentGrid& grid_;
  fs::path work_;
  std::map<std::string, const LabeledImage*> byId_;
};

}  // namespace

ExperimentTables runMatrixExperiment(const ExperimentCorpus& corpus, const ExperimentGrid& grid, const fs::path& outDir) {
  if (corpus.images.size() < 2 || corpus.topicQueries.empty())
    throw Error(ErrorCode::CorpusTooSmall, "the experiment needs at least two images and one topic");
  for (const auto& [topic, examples] : corpus.topicQueries)
    for (const auto& id : examples)
      if (!corpus.find(id)) throw Error(ErrorCode::InvalidParameter, "topic " + topic + " queries unknown image " + id);
  std::error_code ec;
  fs::create_directories(outDir / "work", ec);
  if (ec) throw Error(ErrorCode::OutputNotWritable, "cannot create " + outDir.string());
  MatrixRunner runner(corpus, grid, outDir / "work");

  // Cells: every (feature, bovw, k) for the metric table and every
  // (feature, representation, k') for the representation table.
  std::set<std::pair<std::string, int>> codebooks;
  std::map<CellKey, std::vector<std::string>> cellMetrics;
  auto tableThreeMetric = [](const std::string& rep) { return rep == "vlad" ? "cosine" : "histogram-intersection"; };
  for (const auto& f : grid.features) {
    for (int k : grid.vocabSizes) {
      codebooks.insert({f.name, k});
      auto& m = cellMetrics[{f.name, "bovw", k}];
      for (const auto& metric : grid.metrics) m.push_back(metric);
    }
    for (const auto& rep : grid.representations) {
      for (int k : grid.representationVocabSizes) {
        codebooks.insert({f.name, k});
        cellMetrics[{f.name, rep, k}].push_back(tableThreeMetric(rep));
      }
    }
  }
  for (const auto& g : grid.globalDescriptors) {
    auto& m = cellMetrics[{"", g, 0}];
    for (const auto& metric : grid.metrics) m.push_back(metric);
  }
  for (auto& [key, metrics] : cellMetrics) {
    std::sort(metrics.begin(), metrics.end());
    metrics.erase(std::unique(metrics.begin(), metrics.end()), metrics.end());
  }
  runner.trainCodebooks(codebooks);

  std::vector<CellKey> cells;
  for (const auto& [key, _] : cellMetrics) cells.push_back(key);
  std::vector<std::map<std::string, std::optional<RunResult>>> results(cells.size());
  runPool(cells.size(), grid.workers, [&](std::size_t t) { results[t] = runner.runCell(cells[t], cellMetrics.at(cells[t])); });
  auto result = [&](const CellKey& key, const std::string& metric) -> const std::optional<RunResult>& {
    const auto pos = static_cast<std::size_t>(std::lower_bound(cells.begin(), cells.end(), key) - cells.begin());
    return results[pos].at(metric);
  };

  ExperimentTables tables;
  const std::string hi = "histogram-intersection";
  const std::string& primaryMetric =
      std::find(grid.metrics.begin(), grid.metrics.end(), hi) != grid.metrics.end() ? hi : grid.metrics.front();

  tables.features.name = "table1";
  tables.features.columns = {"feature"};
  for (const auto& m : grid.metrics) tables.features.columns.push_back(m);
  std::map<std::string, int> bestK;
  for (const auto& f : grid.features) {
    std::vector<double> row;
    for (const auto& metric : grid.metrics) {
      double sum = 0.0;
      for (int k : grid.vocabSizes) sum += runner.map(result({f.name, "bovw", k}, metric));
      row.push_back(sum / static_cast<double>(grid.vocabSizes.size()));
    }
    tables.features.rows.push_back({f.name, row});
    double best = -1.0;
    for (int k : grid.vocabSizes) {
      const double v = runner.map(result({f.name, "bovw", k}, primaryMetric));
      if (v > best) {
        best = v;
        bestK[f.name] = k;
      }
    }
  }

  // Fusion of the best run per feature.
  tables.fusion.name = "table2";
  tables.fusion.columns = {"rule", "mAP"};
  for (const auto& rule : grid.fusionRules) {
    RunResult fused;
    fused.descriptor = rule;
    for (const auto& [topic, _] : corpus.topicQueries) {
      std::vector<ScoredList> lists;
      for (const auto& f : grid.features) {
        const auto& run = result({f.name, "bovw", bestK.at(f.name)}, primaryMetric);
        if (run) lists.push_back(run->topics.at(topic));
      }
      if (lists.empty()) continue;
      fused.topics[topic] = fuse(lists, FusionRule{rule, {}, 60.0, true}, corpus.images.size());
    }
    tables.fusion.rows.push_back({rule, {fused.topics.empty() ? kNaN : meanAveragePrecision(fused, corpus.qrels).map}});
  }

  tables.representations.name = "table3";
  tables.representations.columns = {"feature"};
  for (const auto& rep : grid.representations) tables.representations.columns.push_back(rep);
  for (const auto& f : grid.features) {
    std::vector<double> row;
    for (const auto& rep : grid.representations) {
      double sum = 0.0;
      for (int k : grid.representationVocabSizes) sum += runner.map(result({f.name, rep, k}, tableThreeMetric(rep)));
      row.push_back(sum / static_cast<double>(grid.representationVocabSizes.size()));
    }
    tables.representations.rows.push_back({f.name, row});
  }

  // Image representations: the best local-feature BoVW run next to the global descriptors.
  tables.descriptors.name = "table4";
  tables.descriptors.columns = {"representation"};
  for (const auto& m : grid.metrics) tables.descriptors.columns.push_back(m);
  std::vector<std::pair<std::string, CellKey>> rowsSpec;
  if (!grid.features.empty()) {
    const auto& f = grid.features.front();
    rowsSpec.push_back({"bovw " + f.name + " k" + std::to_string(bestK.at(f.name)), {f.name, "bovw", bestK.at(f.name)}});
  }
  for (const auto& g : grid.globalDescriptors) rowsSpec.push_back({g, {"", g, 0}});
  std::vector<std::pair<double, const RunResult*>> ranked;
  for (const auto& [label, key] : rowsSpec) {
    std::vector<double> row;
    for (const auto& metric : grid.metrics) {
      const auto& run = result(key, metric);
      row.push_back(runner.map(run));
      if (metric == primaryMetric && run) ranked.push_back({row.back(), &*run});
    }
    tables.descriptors.rows.push_back({label, row});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  if (ranked.size() > 5) ranked.resize(5);
  if (!ranked.empty()) {
    RunResult fused;
    for (const auto& [topic, _] : corpus.topicQueries) {
      std::vector<ScoredList> lists;
      for (const auto& [score, run] : ranked) lists.push_back(run->topics.at(topic));
      fused.topics[topic] = fuse(lists, FusionRule{"combMNZ", {}, 60.0, true}, corpus.images.size());
    }
    std::vector<double> row(grid.metrics.size(), kNaN);
    const auto col = std::find(grid.metrics.begin(), grid.metrics.end(), primaryMetric) - grid.metrics.begin();
    row[static_cast<std::size_t>(col)] = meanAveragePrecision(fused, corpus.qrels).map;
    tables.descriptors.rows.push_back({"combMNZ of " + std::to_string(ranked.size()) + " best", row});
  }

  writeCsv(tables.features, outDir / "table1.csv");
  writeCsv(tables.fusion, outDir / "table2.csv");
  writeCsv(tables.representations, outDir / "table3.csv");
  writeCsv(tables.descriptors, outDir / "table4.csv");
  return tables;
}

}  // namespace imgseek
