#include "imgseek/vocabulary.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <thread>

namespace imgseek {

namespace {

constexpr char kCodebookMagic[5] = "ISCB";
constexpr std::uint32_t kCodebookVersion = 1;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Assignment {
  std::vector<Eigen::Index> label;
  std::vector<double> dist;  // squared distance to assigned centroid
};

void assignRange(const RowMatrix& samples, const RowMatrix& centroids, Assignment& a, Eigen::Index begin,
                 Eigen::Index end) {
  for (Eigen::Index i = begin; i < end; ++i) {
    Eigen::Index best = 0;
    double bestDist = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (samples.row(i) - centroids.row(c)).squaredNorm();
      if (d < bestDist) {
        bestDist = d;
        best = c;
      }
    }
    a.label[static_cast<std::size_t>(i)] = best;
    a.dist[static_cast<std::size_t>(i)] = bestDist;
  }
}

void assignAll(const RowMatrix& samples, const RowMatrix& centroids, Assignment& a, int workers) {
  const Eigen::Index n = samples.rows();
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    assignRange(samples, centroids, a, 0, n);
    return;
  }
  std::vector<std::jthread> pool;
  const Eigen::Index chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const Eigen::Index begin = w * chunk;
    const Eigen::Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] { assignRange(samples, centroids, a, begin, end); });
  }
}

RowMatrix seedPlusPlus(const RowMatrix& samples, int k, std::mt19937_64& rng) {
  const Eigen::Index n = samples.rows();
  RowMatrix centroids(k, samples.cols());
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  auto first = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
  first = std::min(first, n - 1);
  centroids.row(0) = samples.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (samples.row(i) - centroids.row(c - 1)).squaredNorm();
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], d);
      total += d2[static_cast<std::size_t>(i)];
    }
    Eigen::Index pick = 0;
    if (total > 0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc > target && d2[static_cast<std::size_t>(i)] > 0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        // Rounding pushed target past the last positive mass; take the last one.
        for (Eigen::Index i = n - 1; i >= 0; --i)
          if (d2[static_cast<std::size_t>(i)] > 0) {
            pick = i;
            break;
          }
      }
    }
    centroids.row(c) = samples.row(pick);
  }
  return centroids;
}

}  // namespace

KMeansResult trainKMeans(const RowMatrix& samples, const KMeansOptions& options, const std::string& featureId) {
  if (options.k < 1) throw Error(ErrorCode::InvalidParameter, "k must be >= 1");
  if (samples.rows() < options.k)
    throw Error(ErrorCode::TooFewSamples, std::to_string(samples.rows()) + " samples for k=" + std::to_string(options.k));
  if (!samples.allFinite()) throw Error(ErrorCode::InvalidParameter, "samples contain NaN or Inf");

  std::mt19937_64 rng(options.seed);
  const Eigen::Index n = samples.rows();
  const int k = options.k;
  RowMatrix centroids = seedPlusPlus(samples, k, rng);

  Assignment a{std::vector<Eigen::Index>(static_cast<std::size_t>(n), -1),
               std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  assignAll(samples, centroids, a, options.workers);

  KMeansResult result;
  auto inertia = [&] {
    double s = 0.0;
    for (double d : a.dist) s += d;
    return s;
  };
  result.inertia.push_back(inertia());

  for (int it = 0; it < options.maxIters; ++it) {
    RowMatrix sums = RowMatrix::Zero(k, samples.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = a.label[static_cast<std::size_t>(i)];
      sums.row(c) += samples.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];

    // Empty clusters take the sample farthest from its centroid in the
    // currently largest cluster.
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      const auto largest = static_cast<Eigen::Index>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      Eigen::Index far = -1;
      double farDist = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (a.label[static_cast<std::size_t>(i)] != largest) continue;
        const double d = (samples.row(i) - centroids.row(largest)).squaredNorm();
        if (d > farDist) {
          farDist = d;
          far = i;
        }
      }
      centroids.row(c) = samples.row(far);
      a.label[static_cast<std::size_t>(far)] = c;
      --counts[static_cast<std::size_t>(largest)];
      counts[static_cast<std::size_t>(c)] = 1;
    }

    const auto previous = a.label;
    assignAll(samples, centroids, a, options.workers);
    const double current = inertia();
    const double last = result.inertia.back();
    if (current > last + 1e-9 * std::max(1.0, last))
      throw std::logic_error("k-means inertia increased from " + std::to_string(last) + " to " +
                             std::to_string(current));
    result.inertia.push_back(current);
    result.iterations = it + 1;
    if (a.label == previous) break;
  }

  result.codebook.centroids = centroids.cast<float>().cast<double>();
  result.codebook.featureId = featureId;
  result.codebook.seed = options.seed;
  return result;
}

KMeansResult trainKMeans(const std::vector<Vector>& samples, const KMeansOptions& options,
                         const std::string& featureId) {
  if (samples.empty() || static_cast<int>(samples.size()) < options.k)
    throw Error(ErrorCode::TooFewSamples, std::to_string(samples.size()) + " samples for k=" + std::to_string(options.k));
  const Eigen::Index d = samples.front().size();
  RowMatrix m(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != d) throw Error(ErrorCode::DimensionMismatch, "samples differ in dimension");
    m.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
  }
  return trainKMeans(m, options, featureId);
}

void saveCodebook(const Codebook& codebook, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write codebook " + path.string());
  out.write(kCodebookMagic, 4);
  detail::writePod<std::uint32_t>(out, kCodebookVersion);
  detail::writePod<std::uint32_t>(out, static_cast<std::uint32_t>(codebook.k()));
  detail::writePod<std::uint32_t>(out, static_cast<std::uint32_t>(codebook.dimension()));
  detail::writeString(out, codebook.featureId);
  detail::writePod<std::uint64_t>(out, codebook.seed);
  for (Eigen::Index r = 0; r < codebook.k(); ++r)
    for (Eigen::Index c = 0; c < codebook.dimension(); ++c)
      detail::writePod<float>(out, static_cast<float>(codebook.centroids(r, c)));
  if (!out) throw Error(ErrorCode::Io, "failed writing codebook " + path.string());
}

namespace {
CodebookHeader readHeader(std::istream& in, const std::filesystem::path& path) {
  detail::expectMagic(in, kCodebookMagic, "codebook " + path.string());
  const auto version = detail::readPod<std::uint32_t>(in);
  if (version != kCodebookVersion)
    throw Error(ErrorCode::Io, "unsupported codebook version " + std::to_string(version));
  CodebookHeader h;
  h.k = detail::readPod<std::uint32_t>(in);
  h.d = detail::readPod<std::uint32_t>(in);
  h.featureId = detail::readString(in);
  h.seed = detail::readPod<std::uint64_t>(in);
  return h;
}
}  // namespace

CodebookHeader readCodebookHeader(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open codebook " + path.string());
  return readHeader(in, path);
}

Codebook loadCodebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open codebook " + path.string());
  const auto h = readHeader(in, path);
  Codebook cb;
  cb.featureId = h.featureId;
  cb.seed = h.seed;
  cb.centroids.resize(h.k, h.d);
  for (std::uint32_t r = 0; r < h.k; ++r)
    for (std::uint32_t c = 0; c < h.d; ++c) cb.centroids(r, c) = detail::readPod<float>(in);
  if (!cb.centroids.allFinite()) throw Error(ErrorCode::Io, "codebook contains non-finite centroids");
  return cb;
}

}  // namespace imgseek
