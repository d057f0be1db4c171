#pragma once

#include "imgseek/config.hpp"
#include "imgseek/eval.hpp"
#include "imgseek/extractor.hpp"
#include "imgseek/image.hpp"
#include "imgseek/indexer.hpp"
#include "imgseek/vocabulary.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "imgseek-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline imgseek::Image noiseImage(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  imgseek::Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                                                static_cast<std::uint8_t>(rng())};
  return img;
}

inline std::string readFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void writeFile(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

/// Relative path -> bytes for every regular file below `dir`.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = readFile(e.path());
  return files;
}

/// Trains a small codebook on the corpus and writes it to `path`.
inline imgseek::Codebook trainCodebook(const imgseek::ExperimentCorpus& corpus, const imgseek::ExtractorParams& ex,
                                       int k, const fs::path& path, std::size_t maxSamples = 3000) {
  const auto extractor = imgseek::makeExtractor(ex);
  std::vector<imgseek::Vector> samples;
  for (const auto& li : corpus.images) {
    const auto set = extractor->extract(li.image);
    for (Eigen::Index i = 0; i < set.descriptors.rows(); ++i) samples.push_back(set.descriptors.row(i).transpose());
  }
  std::vector<imgseek::Vector> sampled;
  for (std::size_t i = 0; i < std::min(maxSamples, samples.size()); ++i)
    sampled.push_back(samples[i * samples.size() / std::min(maxSamples, samples.size())]);
  imgseek::KMeansOptions opts;
  opts.k = k;
  opts.maxIters = 15;
  auto cb = imgseek::trainKMeans(sampled, opts, ex.feature).codebook;
  imgseek::saveCodebook(cb, path);
  return cb;
}

inline imgseek::IndexConfig bovwConfig(const std::string& vocabRef, const std::string& metric = "histogram-intersection") {
  imgseek::IndexConfig c;
  c.extractor = {"dense-sift", 8, 16};
  c.descriptor.representation = "bovw";
  c.descriptor.vocabRef = vocabRef;
  c.distanceDefault = metric;
  return c;
}

inline imgseek::IndexConfig globalConfig(const std::string& representation, const std::string& metric = "euclidean") {
  imgseek::IndexConfig c;
  c.descriptor.representation = representation;
  c.distanceDefault = metric;
  return c;
}

/// In-memory loader over a corpus.
inline imgseek::ImageLoader corpusLoader(const imgseek::ExperimentCorpus& corpus) {
  auto byId = std::make_shared<std::map<std::string, const imgseek::Image*>>();
  for (const auto& li : corpus.images) (*byId)[li.record.imageId] = &li.image;
  return [byId](const imgseek::ImageRecord& r) {
    auto it = byId->find(r.imageId);
    if (it == byId->end()) throw imgseek::Error(imgseek::ErrorCode::Io, "no image " + r.imageId);
    return *it->second;
  };
}

inline std::vector<imgseek::ImageRecord> recordsOf(const imgseek::ExperimentCorpus& corpus) {
  std::vector<imgseek::ImageRecord> out;
  for (const auto& li : corpus.images) out.push_back(li.record);
  return out;
}

}  // namespace testing
