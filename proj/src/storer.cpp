#include "imgseek/storer.hpp"

#include "binary_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

namespace imgseek {

namespace {
constexpr char kStoreMagic[5] = "ISST";
constexpr std::uint32_t kStoreVersion = 1;
}  // namespace

MemoryStorer::MemoryStorer(std::string featureId, int dimension)
    : featureId_(std::move(featureId)), dimension_(dimension) {
  if (dimension < 1) throw Error(ErrorCode::InvalidParameter, "store dimension must be >= 1");
}

void MemoryStorer::insert(const std::string& imageId, const DescriptorVector& vector) {
  if (vector.values.size() != dimension_)
    throw Error(ErrorCode::DimensionMismatch, "vector length " + std::to_string(vector.values.size()) +
                                                  " != index dimension " + std::to_string(dimension_));
  if (!vector.values.allFinite()) throw Error(ErrorCode::InvalidParameter, "vector for " + imageId + " is not finite");
  if (rowOf_.count(imageId)) throw Error(ErrorCode::DuplicateId, "image '" + imageId + "' already stored");
  rowOf_.emplace(imageId, ids_.size());
  ids_.push_back(imageId);
  data_.insert(data_.end(), vector.values.data(), vector.values.data() + dimension_);
}

Eigen::Map<const Vector> MemoryStorer::row(std::size_t i) const {
  return Eigen::Map<const Vector>(data_.data() + i * static_cast<std::size_t>(dimension_), dimension_);
}

std::optional<Vector> MemoryStorer::get(const std::string& imageId) const {
  auto it = rowOf_.find(imageId);
  if (it == rowOf_.end()) return std::nullopt;
  return Vector(row(it->second));
}

RowMatrix MemoryStorer::matrix() const {
  RowMatrix m(static_cast<Eigen::Index>(ids_.size()), dimension_);
  for (std::size_t i = 0; i < ids_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = row(i).transpose();
  return m;
}

ScoredList MemoryStorer::scan(const Vector& query, const Metric& metric, const std::vector<std::string>* shortlist,
                              std::size_t topN, int workers) const {
  if (query.size() != dimension_)
    throw Error(ErrorCode::DimensionMismatch, "query length " + std::to_string(query.size()) +
                                                  " != index dimension " + std::to_string(dimension_));
  std::vector<std::size_t> rows;
  if (shortlist) {
    rows.reserve(shortlist->size());
    for (const auto& id : *shortlist) {
      auto it = rowOf_.find(id);
      if (it != rowOf_.end()) rows.push_back(it->second);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  } else {
    rows.resize(ids_.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  }

  ScoredList out;
  out.polarity = metric.polarity;
  out.sourceTag = metric.name;
  out.entries.resize(rows.size());
  auto scoreRange = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out.entries[i] = {ids_[rows[i]], metric(query, row(rows[i]))};
  };
  const std::size_t n = rows.size();
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2 * w) {
    scoreRange(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + w - 1) / w;
    for (std::size_t b = 0; b < n; b += chunk) pool.emplace_back(scoreRange, b, std::min(n, b + chunk));
  }
  out.sortAndTruncate(topN);
  return out;
}

BinaryStorer::BinaryStorer(std::filesystem::path location, std::string featureId, int dimension)
    : MemoryStorer(std::move(featureId), dimension), location_(std::move(location)) {}

void BinaryStorer::flush() {
  std::ofstream out(location_, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + location_.string());
  out.write(kStoreMagic, 4);
  detail::writePod<std::uint32_t>(out, kStoreVersion);
  detail::writePod<std::uint32_t>(out, static_cast<std::uint32_t>(dimension_));
  detail::writePod<std::uint64_t>(out, ids_.size());
  detail::writeString(out, featureId_);
  for (const auto& id : ids_) detail::writeString(out, id);
  out.write(reinterpret_cast<const char*>(data_.data()), static_cast<std::streamsize>(data_.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + location_.string());
}

std::unique_ptr<BinaryStorer> BinaryStorer::open(const std::filesystem::path& location) {
  std::ifstream in(location, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + location.string());
  detail::expectMagic(in, kStoreMagic, location.string());
  if (detail::readPod<std::uint32_t>(in) != kStoreVersion)
    throw Error(ErrorCode::Io, location.string() + ": unsupported store version");
  const auto dim = detail::readPod<std::uint32_t>(in);
  const auto count = detail::readPod<std::uint64_t>(in);
  auto store = std::make_unique<BinaryStorer>(location, detail::readString(in), static_cast<int>(dim));
  std::vector<std::string> ids(count);
  for (auto& id : ids) id = detail::readString(in);
  store->data_.resize(count * dim);
  in.read(reinterpret_cast<char*>(store->data_.data()), static_cast<std::streamsize>(store->data_.size() * sizeof(double)));
  if (!in) throw Error(ErrorCode::Io, location.string() + ": truncated matrix");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!store->rowOf_.emplace(ids[i], i).second) throw Error(ErrorCode::DuplicateId, "duplicate id in " + location.string());
  }
  store->ids_ = std::move(ids);
  return store;
}

namespace {

std::filesystem::path metaPath(const std::filesystem::path& location) {
  return std::filesystem::path(location.string() + ".meta.json");
}

void appendNumber(std::string& line, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, end);
}

}  // namespace

CsvStorer::CsvStorer(std::filesystem::path location, std::string featureId, int dimension)
    : MemoryStorer(std::move(featureId), dimension), location_(std::move(location)) {}

void CsvStorer::flush() {
  std::ofstream out(location_, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + location_.string());
  std::string line = "imageId";
  for (int i = 0; i < dimension_; ++i) line += ",v" + std::to_string(i);
  out << line << '\n';
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (ids_[r].find_first_of(",\n\r\"") != std::string::npos)
      throw Error(ErrorCode::InvalidParameter, "imageId '" + ids_[r] + "' cannot be stored in CSV");
    line = ids_[r];
    for (int c = 0; c < dimension_; ++c) {
      line += ',';
      appendNumber(line, data_[r * static_cast<std::size_t>(dimension_) + static_cast<std::size_t>(c)]);
    }
    out << line << '\n';
  }
  std::ofstream meta(metaPath(location_), std::ios::trunc);
  meta << nlohmann::json{{"featureId", featureId_}, {"dimension", dimension_}, {"count", ids_.size()}}.dump() << '\n';
}

std::unique_ptr<CsvStorer> CsvStorer::open(const std::filesystem::path& location) {
  std::ifstream metaIn(metaPath(location));
  if (!metaIn) throw Error(ErrorCode::Io, "missing CSV metadata for " + location.string());
  const auto meta = nlohmann::json::parse(metaIn);
  auto store = std::make_unique<CsvStorer>(location, meta.at("featureId").get<std::string>(),
                                           meta.at("dimension").get<int>());
  std::ifstream in(location);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + location.string());
  std::string line;
  std::getline(in, line);  // header
  DescriptorVector v{store->featureId_, Vector(store->dimension_), false};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::Io, "malformed CSV row in " + location.string());
    const std::string id = line.substr(0, comma);
    const char* p = line.data() + comma + 1;
    const char* end = line.data() + line.size();
    for (int c = 0; c < store->dimension_; ++c) {
      auto [next, ec] = std::from_chars(p, end, v.values[c]);
      if (ec != std::errc()) throw Error(ErrorCode::Io, "malformed number in " + location.string());
      p = (next < end && *next == ',') ? next + 1 : next;
    }
    store->insert(id, v);
  }
  if (store->count() != meta.at("count").get<std::size_t>())
    throw Error(ErrorCode::Io, location.string() + ": row count disagrees with metadata");
  return store;
}

std::unique_ptr<MemoryStorer> createStorer(const StorerParams& params, const std::filesystem::path& baseDir,
                                           const std::string& featureId, int dimension) {
  const auto path = baseDir / params.location;
  if (params.backend == "binary") return std::make_unique<BinaryStorer>(path, featureId, dimension);
  if (params.backend == "csv") return std::make_unique<CsvStorer>(path, featureId, dimension);
  throw Error(ErrorCode::UnknownComponent, "Storer '" + params.backend + "' is not registered");
}

std::unique_ptr<MemoryStorer> openStorer(const StorerParams& params, const std::filesystem::path& baseDir) {
  const auto path = baseDir / params.location;
  if (params.backend == "binary") return BinaryStorer::open(path);
  if (params.backend == "csv") return CsvStorer::open(path);
  throw Error(ErrorCode::UnknownComponent, "Storer '" + params.backend + "' is not registered");
}

}  // namespace imgseek
