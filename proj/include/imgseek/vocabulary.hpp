#pragma once

#include "imgseek/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace imgseek {

/// k visual words of dimension d, one centroid per row.
struct Codebook {
  RowMatrix centroids;
  std::string featureId;
  std::uint64_t seed = 0;

  Eigen::Index k() const { return centroids.rows(); }
  Eigen::Index dimension() const { return centroids.cols(); }

  bool operator==(const Codebook&) const = default;
};

struct KMeansOptions {
  int k = 50;
  int maxIters = 25;
  std::uint64_t seed = 7;
  int workers = 1;
};

struct KMeansResult {
  Codebook codebook;
  int iterations = 0;
  // Within-cluster sum of squares after every assignment step.
  std::vector<double> inertia;
};

/// Seeded k-means++ followed by Lloyd iterations. The assignment step is
/// split over `workers` threads; reductions always run in sample order so the
/// result does not depend on the worker count. Centroids are rounded to
/// float precision so a saved codebook reloads bit-identically.
KMeansResult trainKMeans(const RowMatrix& samples, const KMeansOptions& options,
                         const std::string& featureId = {});
KMeansResult trainKMeans(const std::vector<Vector>& samples, const KMeansOptions& options,
                         const std::string& featureId = {});

/// Nearest centroid under Euclidean distance; ties go to the lowest index.
template <typename Derived>
Eigen::Index assign(const Eigen::MatrixBase<Derived>& vector, const Codebook& codebook) {
  if (vector.size() != codebook.dimension())
    throw Error(ErrorCode::DimensionMismatch, "vector dimension " + std::to_string(vector.size()) +
                                                  " != codebook dimension " + std::to_string(codebook.dimension()));
  Eigen::Index best = 0;
  double bestDist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < codebook.k(); ++i) {
    const double d = (codebook.centroids.row(i).transpose() - vector).squaredNorm();
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  }
  return best;
}

void saveCodebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook loadCodebook(const std::filesystem::path& path);

/// Reads only the header; used to validate configs without loading centroids.
struct CodebookHeader {
  std::uint32_t k = 0;
  std::uint32_t d = 0;
  std::string featureId;
  std::uint64_t seed = 0;
};
CodebookHeader readCodebookHeader(const std::filesystem::path& path);

}  // namespace imgseek
