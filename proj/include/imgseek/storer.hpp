#pragma once

#include "imgseek/core.hpp"
#include "imgseek/similarity.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace imgseek {

struct StorerParams {
  std::string backend = "binary";  // binary | csv
  std::string location = "descriptors.bin";

  bool operator==(const StorerParams&) const = default;
};

/// The Storer component: keeps descriptor vectors of one feature/dimension
/// and ranks them against a query. Database-backed stores implement the
/// same interface.
class Storer {
 public:
  virtual ~Storer() = default;

  /// Throws DimensionMismatch or DuplicateId.
  virtual void insert(const std::string& imageId, const DescriptorVector& vector) = 0;
  virtual std::optional<Vector> get(const std::string& imageId) const = 0;
  virtual bool contains(const std::string& imageId) const = 0;
  virtual std::size_t count() const = 0;
  /// Ids in insertion order.
  virtual const std::vector<std::string>& ids() const = 0;
  virtual const std::string& featureId() const = 0;
  virtual int dimension() const = 0;
  /// Persists pending inserts to the backend location.
  virtual void flush() = 0;

  /// Top-N entries under `metric`, restricted to `shortlist` when given.
  /// Ties break on imageId. `workers` splits the scoring loop; the merge is
  /// deterministic.
  virtual ScoredList scan(const Vector& query, const Metric& metric,
                          const std::vector<std::string>* shortlist, std::size_t topN, int workers = 1) const = 0;

  ScoredList scan(const Vector& query, const std::string& metricName, const std::vector<std::string>* shortlist,
                  std::size_t topN, int workers = 1) const {
    return scan(query, metricByName(metricName), shortlist, topN, workers);
  }
};

/// In-memory rows shared by the file backends; `flush` writes the file.
class MemoryStorer : public Storer {
 public:
  MemoryStorer(std::string featureId, int dimension);

  void insert(const std::string& imageId, const DescriptorVector& vector) override;
  std::optional<Vector> get(const std::string& imageId) const override;
  bool contains(const std::string& imageId) const override { return rowOf_.count(imageId) > 0; }
  std::size_t count() const override { return ids_.size(); }
  const std::vector<std::string>& ids() const override { return ids_; }
  const std::string& featureId() const override { return featureId_; }
  int dimension() const override { return dimension_; }
  void flush() override {}

  ScoredList scan(const Vector& query, const Metric& metric, const std::vector<std::string>* shortlist,
                  std::size_t topN, int workers = 1) const override;
  using Storer::scan;

  /// Row view of the stored vector at insertion position i.
  Eigen::Map<const Vector> row(std::size_t i) const;
  /// All rows as a (count x dimension) matrix copy.
  RowMatrix matrix() const;

 protected:
  std::string featureId_;
  int dimension_;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> rowOf_;
};

/// Fixed-record binary file: header, id table, float64 row-major matrix.
class BinaryStorer final : public MemoryStorer {
 public:
  BinaryStorer(std::filesystem::path location, std::string featureId, int dimension);
  static std::unique_ptr<BinaryStorer> open(const std::filesystem::path& location);
  void flush() override;

 private:
  std::filesystem::path location_;
};

/// `imageId,v0,...,v{d-1}` rows plus a `<file>.meta.json` sidecar holding
/// featureId, dimension and count.
class CsvStorer final : public MemoryStorer {
 public:
  CsvStorer(std::filesystem::path location, std::string featureId, int dimension);
  static std::unique_ptr<CsvStorer> open(const std::filesystem::path& location);
  void flush() override;

 private:
  std::filesystem::path location_;
};

/// New empty store at `baseDir / params.location`.
std::unique_ptr<MemoryStorer> createStorer(const StorerParams& params, const std::filesystem::path& baseDir,
                                           const std::string& featureId, int dimension);
std::unique_ptr<MemoryStorer> openStorer(const StorerParams& params, const std::filesystem::path& baseDir);

}  // namespace imgseek
