// imgseek: index, search, fuse, train-vocab, eval and serve from the shell.
// stdout carries JSON lines only; diagnostics go to stderr.

#include "imgseek/eval.hpp"
#include "imgseek/fusor.hpp"
#include "imgseek/indexer.hpp"
#include "imgseek/service.hpp"
#include "imgseek/vocabulary.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace imgseek;

namespace {

void emit(const json& line) { std::cout << line.dump() << '\n'; }

std::string envOr(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

QueryExample exampleFromArg(const std::string& arg) {
  if (fs::is_regular_file(arg)) return loadImage(arg);
  return arg;  // an indexed imageId
}

struct IndexArgs {
  std::string config, images, out, manifest;
  int workers = 0;
  std::size_t shardSize = 64;
};

int runIndexVerb(const IndexArgs& a) {
  IndexJob job;
  job.config = loadConfig(a.config);
  job.configDir = fs::path(a.config).parent_path();
  job.images = loadRecords(a.images);
  job.imageRoot = fs::path(a.images).parent_path();
  job.outputDir = a.out;
  job.mode = {a.workers, a.shardSize};
  if (!a.manifest.empty()) job.manifestPath = a.manifest;
  const IndexReport report = runIndex(job);
  emit(report.toJson());
  return report.ok ? 0 : 2;
}

struct SearchArgs {
  std::vector<std::string> indices, positives, negatives, modalities;
  std::string text;
  std::size_t top = kDefaultTopN;
};

int runSearchVerb(const SearchArgs& a) {
  Engine engine("");
  for (const auto& dir : a.indices) engine.registerIndex(fs::path(dir).lexically_normal().filename().string(), dir);
  ApiQuery q;
  for (const auto& p : a.positives) q.positives.push_back(exampleFromArg(p));
  for (const auto& n : a.negatives) q.negatives.push_back(exampleFromArg(n));
  if (!a.text.empty()) q.text = a.text;
  q.modalities = a.modalities;
  q.topN = a.top;
  const json body = engine.present(engine.search(q));
  for (const auto& row : body.at("results")) emit(row);
  return 0;
}

struct FuseArgs {
  std::string rule = "combMNZ", out;
  std::vector<std::string> runs;
  std::vector<double> weights;
  double c = 60.0;
  bool noNormalize = false;
  std::size_t top = 1000;
};

int runFuseVerb(const FuseArgs& a) {
  FusionRule rule{a.rule, a.weights, a.c, !a.noNormalize};
  std::vector<RunResult> runs;
  for (const auto& path : a.runs) runs.push_back(readRun(path));
  std::set<std::string> topics;
  for (const auto& r : runs)
    for (const auto& [t, _] : r.topics) topics.insert(t);
  RunResult fused;
  fused.descriptor = a.rule;
  for (const auto& topic : topics) {
    std::vector<ScoredList> lists;
    for (const auto& r : runs) {
      auto it = r.topics.find(topic);
      // A run without this topic contributes an empty list so linear weights stay aligned.
      lists.push_back(it == r.topics.end() ? ScoredList{} : it->second);
    }
    fused.topics[topic] = fuse(lists, rule, a.top);
  }
  if (!a.out.empty()) {
    writeRun(fused, a.out, a.rule);
    emit({{"out", a.out}, {"rule", a.rule}, {"topics", fused.topics.size()}});
  } else {
    for (const auto& [topic, list] : fused.topics)
      for (std::size_t i = 0; i < list.entries.size(); ++i)
        emit({{"topic", topic}, {"imageId", list.entries[i].imageId}, {"rank", i + 1}, {"score", list.entries[i].score}});
  }
  return 0;
}

struct TrainArgs {
  std::string features, out, feature = "dense-sift";
  int k = 50, gridStep = 8, patchSize = 16, maxIters = 25, workers = 1;
  std::uint64_t seed = 7;
  std::size_t maxSamples = 100000;
};

int runTrainVerb(const TrainArgs& a) {
  const auto extractor = makeExtractor({a.feature, a.gridStep, a.patchSize});
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a.features)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Vector> samples;
  std::size_t skipped = 0;
  for (const auto& f : files) {
    try {
      const auto set = extractor->extract(loadImage(f));
      for (Eigen::Index i = 0; i < set.descriptors.rows(); ++i) samples.push_back(set.descriptors.row(i).transpose());
    } catch (const Error& e) {
      ++skipped;
      std::cerr << json{{"warning", "skipped image"}, {"path", f.string()}, {"reason", e.what()}}.dump() << '\n';
    }
  }
  if (samples.size() > a.maxSamples) {
    std::vector<Vector> sampled;
    for (std::size_t i = 0; i < a.maxSamples; ++i) sampled.push_back(samples[i * samples.size() / a.maxSamples]);
    samples = std::move(sampled);
  }
  KMeansOptions opts{a.k, a.maxIters, a.seed, a.workers};
  const KMeansResult result = trainKMeans(samples, opts, a.feature);
  saveCodebook(result.codebook, a.out);
  emit({{"out", a.out},
        {"k", result.codebook.k()},
        {"dimension", result.codebook.dimension()},
        {"images", files.size() - skipped},
        {"samples", samples.size()},
        {"iterations", result.iterations},
        {"inertia", result.inertia.empty() ? 0.0 : result.inertia.back()}});
  return 0;
}

struct EvalArgs {
  std::string run, qrels, experiment;
  int classes = 6, perClass = 8, size = 64, workers = 1;
  std::vector<int> vocabSizes{10, 20, 30, 40, 50, 100};
  std::uint64_t seed = 7;
};

int runEvalVerb(const EvalArgs& a) {
  if (!a.experiment.empty()) {
    SyntheticCorpusOptions o;
    o.classes = a.classes;
    o.perClass = a.perClass;
    o.size = a.size;
    o.seed = a.seed;
    ExperimentGrid grid;
    grid.vocabSizes = a.vocabSizes;
    grid.seed = a.seed;
    grid.workers = a.workers;
    const auto tables = runMatrixExperiment(generateSyntheticCorpus(o), grid, a.experiment);
    for (const auto* t : {&tables.features, &tables.fusion, &tables.representations, &tables.descriptors}) {
      for (const auto& [label, values] : t->rows) {
        json row{{"table", t->name}, {t->columns.front(), label}};
        for (std::size_t i = 0; i < values.size(); ++i)
          row[t->columns[i + 1]] = std::isnan(values[i]) ? json(nullptr) : json(values[i]);
        emit(row);
      }
    }
    return 0;
  }
  if (a.run.empty() || a.qrels.empty()) throw CLI::ValidationError("eval", "--run and --qrels are required");
  const MapSummary s = meanAveragePrecision(readRun(a.run), readQrels(a.qrels));
  for (const auto& [topic, ap] : s.perTopic) emit({{"topic", topic}, {"ap", ap}});
  emit({{"map", s.map}, {"scoredTopics", s.scoredTopics}, {"unjudgedTopics", s.unjudgedTopics}});
  return 0;
}

int runServeVerb(int port, const std::string& root) {
  Engine engine(root);
  Server server(engine, {"0.0.0.0", port});
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imgseek: content-based image retrieval engine"};
  app.require_subcommand(1);

  IndexArgs ia;
  auto* index = app.add_subcommand("index", "Build an index from a JSON-lines image list");
  index->add_option("--config", ia.config, "Index configuration JSON")->required()->check(CLI::ExistingFile);
  index->add_option("--images", ia.images, "JSON lines {imageId, uri, caption, modality, articleUri}")
      ->required()
      ->check(CLI::ExistingFile);
  index->add_option("--out", ia.out, "Output index directory")->required();
  index->add_option("--workers", ia.workers, "Parallel workers (0 = serial)")->check(CLI::NonNegativeNumber);
  index->add_option("--shard-size", ia.shardSize, "Images per shard")->check(CLI::PositiveNumber);
  index->add_option("--manifest", ia.manifest, "Write the shard manifest here");

  SearchArgs sa;
  auto* search = app.add_subcommand("search", "Query one or more indices");
  search->add_option("--index", sa.indices, "Index directory (repeatable)")->required();
  search->add_option("--positive", sa.positives, "Image file or indexed imageId");
  search->add_option("--negative", sa.negatives, "Image file or indexed imageId");
  search->add_option("--text", sa.text, "Caption text query");
  search->add_option("--modality", sa.modalities, "Keep only these modalities");
  search->add_option("--top", sa.top, "Number of results")->check(CLI::Range(std::size_t{1}, kMaxTopN));

  FuseArgs fa;
  auto* fuseCmd = app.add_subcommand("fuse", "Fuse TREC run files");
  fuseCmd->add_option("--rule", fa.rule, "combSUM, combMNZ, combMAX, combMIN, linear, borda or rrf");
  fuseCmd->add_option("runs", fa.runs, "Input TREC runs")->required()->check(CLI::ExistingFile);
  fuseCmd->add_option("--out", fa.out, "Output TREC run");
  fuseCmd->add_option("--weights", fa.weights, "Linear weights, one per run");
  fuseCmd->add_option("--c", fa.c, "rrf constant");
  fuseCmd->add_flag("--no-normalize", fa.noNormalize, "Skip min-max normalization");
  fuseCmd->add_option("--top", fa.top, "Results per topic")->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* train = app.add_subcommand("train-vocab", "Train a k-means visual vocabulary");
  train->add_option("--features", ta.features, "Directory of training images")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", ta.out, "Codebook output file")->required();
  train->add_option("--k", ta.k, "Vocabulary size")->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed, "Random seed");
  train->add_option("--feature", ta.feature, "dense-sift, rootsift or lab");
  train->add_option("--grid-step", ta.gridStep)->check(CLI::PositiveNumber);
  train->add_option("--patch-size", ta.patchSize)->check(CLI::PositiveNumber);
  train->add_option("--max-iters", ta.maxIters)->check(CLI::PositiveNumber);
  train->add_option("--max-samples", ta.maxSamples)->check(CLI::PositiveNumber);
  train->add_option("--workers", ta.workers)->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* evalCmd = app.add_subcommand("eval", "Score a run, or run the synthetic experiment grid");
  evalCmd->add_option("--run", ea.run, "TREC run file")->check(CLI::ExistingFile);
  evalCmd->add_option("--qrels", ea.qrels, "TREC qrels file")->check(CLI::ExistingFile);
  evalCmd->add_option("--experiment", ea.experiment, "Write table1..table4 CSVs into this directory");
  evalCmd->add_option("--classes", ea.classes)->check(CLI::PositiveNumber);
  evalCmd->add_option("--per-class", ea.perClass)->check(CLI::PositiveNumber);
  evalCmd->add_option("--size", ea.size)->check(CLI::PositiveNumber);
  evalCmd->add_option("--vocab-sizes", ea.vocabSizes)->check(CLI::PositiveNumber);
  evalCmd->add_option("--seed", ea.seed);
  evalCmd->add_option("--workers", ea.workers)->check(CLI::PositiveNumber);

  int port = std::atoi(envOr("IMGSEEK_PORT", "8080").c_str());
  std::string root = envOr("IMGSEEK_INDEX_ROOT", "indices");
  auto* serve = app.add_subcommand("serve", "Run the REST service");
  serve->add_option("--port", port, "Listen port (env IMGSEEK_PORT)")->check(CLI::Range(0, 65535));
  serve->add_option("--indexRoot", root, "Directory of indices (env IMGSEEK_INDEX_ROOT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cerr << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }

  try {
    if (*index) return runIndexVerb(ia);
    if (*search) {
      if (sa.positives.empty() && sa.text.empty()) {
        std::cerr << "search needs --positive or --text\n";
        return 1;
      }
      return runSearchVerb(sa);
    }
    if (*fuseCmd) return runFuseVerb(fa);
    if (*train) return runTrainVerb(ta);
    if (*evalCmd) return runEvalVerb(ea);
    if (*serve) return runServeVerb(port, root);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(toString(e.code()))}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  return 1;
}
