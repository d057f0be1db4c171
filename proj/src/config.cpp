#include "imgseek/config.hpp"

#include "imgseek/similarity.hpp"

#include <fstream>
#include <set>

namespace imgseek {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedConfig, what); }

void rejectUnknownKeys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) malformed(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) malformed("unknown key '" + key + "' in " + where);
}

const json& required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) malformed("missing \"" + std::string(key) + "\" in " + where);
  return j.at(key);
}

}  // namespace

json toJson(const IndexConfig& c) {
  json extractor{{"feature", c.extractor.feature}, {"gridStep", c.extractor.gridStep}, {"patchSize", c.extractor.patchSize}};
  json descriptor{{"representation", c.descriptor.representation},
                  {"gridCells", c.descriptor.gridCells},
                  {"pyramidLevels", c.descriptor.pyramidLevels},
                  {"normalization", std::string(toString(c.descriptor.normalization))},
                  {"hsvBins", c.descriptor.hsvBins},
                  {"hogMiniSize", c.descriptor.hogMiniSize},
                  {"hogCells", c.descriptor.hogCells},
                  {"hogBins", c.descriptor.hogBins},
                  {"gaborScales", c.descriptor.gaborScales},
                  {"gaborOrientations", c.descriptor.gaborOrientations}};
  if (c.descriptor.vocabRef) descriptor["vocabRef"] = *c.descriptor.vocabRef;
  json out{{"version", c.version},
           {"extractorParams", extractor},
           {"descriptorParams", descriptor},
           {"weighting", {{"kind", c.weighting.kind}, {"k", c.weighting.k}}},
           {"storerParams", {{"backend", c.storer.backend}, {"location", c.storer.location}}},
           {"distanceDefault", c.distanceDefault}};
  if (c.ann)
    out["annParams"] = {{"tables", c.ann->tables},
                        {"hashesPerTable", c.ann->hashesPerTable},
                        {"bucketWidth", c.ann->bucketWidth},
                        {"seed", c.ann->seed}};
  return out;
}

IndexConfig configFromJson(const json& j) {
  try {
    rejectUnknownKeys(j, {"version", "extractorParams", "descriptorParams", "weighting", "annParams", "storerParams",
                          "distanceDefault"},
                      "index config");
    IndexConfig c;
    c.version = required(j, "version", "index config").get<std::string>();
    const auto dot = c.version.find('.');
    if (c.version.substr(0, dot) != "1") malformed("unsupported config major version '" + c.version + "'");

    const auto& ex = required(j, "extractorParams", "index config");
    rejectUnknownKeys(ex, {"feature", "gridStep", "patchSize"}, "extractorParams");
    c.extractor.feature = required(ex, "feature", "extractorParams").get<std::string>();
    c.extractor.gridStep = ex.value("gridStep", c.extractor.gridStep);
    c.extractor.patchSize = ex.value("patchSize", c.extractor.patchSize);

    const auto& de = required(j, "descriptorParams", "index config");
    rejectUnknownKeys(de, {"representation", "vocabRef", "gridCells", "pyramidLevels", "normalization", "hsvBins",
                           "hogMiniSize", "hogCells", "hogBins", "gaborScales", "gaborOrientations"},
                      "descriptorParams");
    auto& d = c.descriptor;
    d.representation = required(de, "representation", "descriptorParams").get<std::string>();
    if (de.contains("vocabRef")) d.vocabRef = de.at("vocabRef").get<std::string>();
    d.gridCells = de.value("gridCells", d.gridCells);
    d.pyramidLevels = de.value("pyramidLevels", d.pyramidLevels);
    if (de.contains("normalization")) {
      try {
        d.normalization = normalizationFromString(de.at("normalization").get<std::string>());
      } catch (const Error& e) {
        malformed(e.what());
      }
    }
    if (de.contains("hsvBins")) d.hsvBins = de.at("hsvBins").get<std::array<int, 3>>();
    d.hogMiniSize = de.value("hogMiniSize", d.hogMiniSize);
    d.hogCells = de.value("hogCells", d.hogCells);
    d.hogBins = de.value("hogBins", d.hogBins);
    d.gaborScales = de.value("gaborScales", d.gaborScales);
    d.gaborOrientations = de.value("gaborOrientations", d.gaborOrientations);

    if (j.contains("weighting")) {
      const auto& w = j.at("weighting");
      rejectUnknownKeys(w, {"kind", "k"}, "weighting");
      c.weighting.kind = required(w, "kind", "weighting").get<std::string>();
      c.weighting.k = w.value("k", 0);
    }
    if (j.contains("annParams") && !j.at("annParams").is_null()) {
      const auto& a = j.at("annParams");
      rejectUnknownKeys(a, {"tables", "hashesPerTable", "bucketWidth", "seed"}, "annParams");
      LshParams p;
      p.tables = a.value("tables", p.tables);
      p.hashesPerTable = a.value("hashesPerTable", p.hashesPerTable);
      p.bucketWidth = a.value("bucketWidth", p.bucketWidth);
      p.seed = a.value("seed", p.seed);
      c.ann = p;
    }
    const auto& st = required(j, "storerParams", "index config");
    rejectUnknownKeys(st, {"backend", "location"}, "storerParams");
    c.storer.backend = required(st, "backend", "storerParams").get<std::string>();
    c.storer.location = required(st, "location", "storerParams").get<std::string>();
    c.distanceDefault = required(j, "distanceDefault", "index config").get<std::string>();

    try {
      validateConfig(c);
    } catch (const Error& e) {
      malformed(e.what());
    }
    return c;
  } catch (const json::exception& e) {
    malformed(std::string("config schema violation: ") + e.what());
  }
}

void validateConfig(const IndexConfig& c) {
  auto invalid = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
  try {
    extractorDimension(c.extractor.feature);
    descriptorDimension(c.descriptor, 1, 1);
    metricByName(c.distanceDefault);
  } catch (const Error& e) {
    invalid(e.what());
  }
  if (c.extractor.patchSize < 8 || c.extractor.patchSize % 2 != 0) invalid("patchSize must be even and >= 8");
  if (c.extractor.gridStep < 1) invalid("gridStep must be >= 1");
  const bool vocab = isVocabularyBased(c.descriptor.representation);
  if (vocab != c.descriptor.vocabRef.has_value())
    invalid("vocabRef is required exactly for vocabulary-based representations");
  if (c.descriptor.gridCells < 1 || c.descriptor.pyramidLevels < 1) invalid("grid/pyramid sizes must be >= 1");
  for (int b : c.descriptor.hsvBins)
    if (b < 1) invalid("hsvBins must be >= 1");
  if (c.weighting.kind != "none" && c.weighting.kind != "tfidf" && c.weighting.kind != "frequent-items")
    invalid("unknown weighting '" + c.weighting.kind + "'");
  if (c.weighting.kind != "none" && !vocab) invalid("weighting applies only to vocabulary-based representations");
  if (c.weighting.kind != "none" && c.descriptor.representation == "vlad")
    invalid("weighting needs count histograms; vlad residuals can be negative");
  if (c.weighting.kind == "frequent-items" && c.weighting.k < 1) invalid("frequent-items needs k >= 1");
  if (c.ann && (c.ann->tables < 1 || c.ann->hashesPerTable < 1 || c.ann->bucketWidth < 0))
    invalid("annParams out of range");
  if (c.storer.backend != "binary" && c.storer.backend != "csv") invalid("unknown storer '" + c.storer.backend + "'");
  if (c.storer.location.empty()) invalid("storer location is empty");
}

void saveConfig(const IndexConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write config " + path.string());
  out << toJson(config).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing config " + path.string());
}

IndexConfig loadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    malformed(path.string() + ": " + e.what());
  }
  IndexConfig c = configFromJson(j);
  if (c.descriptor.vocabRef) {
    const auto vocabPath = path.parent_path() / *c.descriptor.vocabRef;
    if (!std::filesystem::exists(vocabPath)) malformed("vocabulary '" + vocabPath.string() + "' does not exist");
    CodebookHeader h;
    try {
      h = readCodebookHeader(vocabPath);
    } catch (const Error& e) {
      malformed(e.what());
    }
    if (static_cast<int>(h.d) != extractorDimension(c.extractor.feature))
      malformed("vocabulary dimension " + std::to_string(h.d) + " does not match extractor '" + c.extractor.feature +
                "' output " + std::to_string(extractorDimension(c.extractor.feature)));
  }
  return c;
}

Pipeline::Pipeline(const IndexConfig& config, std::shared_ptr<const Codebook> codebook)
    : codebook_(std::move(codebook)) {
  validateConfig(config);
  if (isVocabularyBased(config.descriptor.representation)) {
    if (!codebook_) throw Error(ErrorCode::MissingVocabulary, "representation needs a vocabulary");
    extractor_ = makeExtractor(config.extractor);
    if (codebook_->dimension() != extractor_->dimension())
      throw Error(ErrorCode::DimensionMismatch, "codebook dimension does not match extractor output");
  }
  descriptor_ = makeDescriptor(config.descriptor, codebook_);
}

Pipeline Pipeline::fromConfig(const IndexConfig& config, const std::filesystem::path& baseDir) {
  std::shared_ptr<const Codebook> codebook;
  if (config.descriptor.vocabRef) {
    const auto path = baseDir / *config.descriptor.vocabRef;
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::MissingVocabulary, "vocabulary '" + path.string() + "' not found");
    codebook = std::make_shared<const Codebook>(loadCodebook(path));
  }
  return Pipeline(config, std::move(codebook));
}

DescriptorVector Pipeline::describe(const Image& image) const {
  if (!descriptor_->needsLocalFeatures()) return descriptor_->describe(image, nullptr);
  LocalFeatureSet features;
  try {
    features = extractor_->extract(image);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ImageTooSmall) throw;
    // Too small for one patch: index as a zero vector.
    features.featureId = extractor_->params().feature;
    features.descriptors.resize(0, extractor_->dimension());
  }
  return descriptor_->describe(image, &features);
}

std::string Pipeline::featureId() const {
  const auto& rep = descriptor_->params().representation;
  return extractor_ ? rep + ":" + extractor_->params().feature : rep;
}

}  // namespace imgseek
