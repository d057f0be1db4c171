#include "imgseek/ann.hpp"

#include "binary_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <thread>

namespace imgseek {

namespace {

constexpr char kTableMagic[5] = "ISLT";
constexpr std::uint32_t kLshVersion = 1;

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Streams: one per (table, role); role 0 = projection entries, 1 = offsets.
std::uint64_t streamId(int table, int role) { return static_cast<std::uint64_t>(table) * 2 + static_cast<std::uint64_t>(role); }

std::filesystem::path tablePath(const std::filesystem::path& dir, int t) {
  char name[32];
  std::snprintf(name, sizeof(name), "table_%03d.bin", t);
  return dir / name;
}

}  // namespace

double counterUniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  const std::uint64_t bits = mix64(mix64(seed) ^ mix64(stream * 0xD1B54A32D192ED03ull + counter));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double counterNormal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  const double u1 = counterUniform(seed, stream, 2 * counter);
  const double u2 = counterUniform(seed, stream, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double estimateBucketWidth(const RowMatrix& vectors) {
  const Eigen::Index n = std::min<Eigen::Index>(vectors.rows(), 1000);
  if (n < 2) return 1.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      sum += (vectors.row(i) - vectors.row(j)).norm();
      ++pairs;
    }
  const double w = 0.1 * sum / static_cast<double>(pairs);
  return w > 0 ? w : 1.0;
}

void LshIndex::makeProjections() {
  const int L = params_.tables, k = params_.hashesPerTable, d = params_.dimension;
  projections_.assign(static_cast<std::size_t>(L), RowMatrix(k, d));
  offsets_.assign(static_cast<std::size_t>(L), Vector(k));
  for (int t = 0; t < L; ++t) {
    auto& a = projections_[static_cast<std::size_t>(t)];
    for (int h = 0; h < k; ++h)
      for (int c = 0; c < d; ++c)
        a(h, c) = counterNormal(params_.seed, streamId(t, 0), static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(c));
    for (int h = 0; h < k; ++h)
      offsets_[static_cast<std::size_t>(t)][h] =
          counterUniform(params_.seed, streamId(t, 1), static_cast<std::uint64_t>(h)) * params_.bucketWidth;
  }
}

std::vector<std::int64_t> LshIndex::hashTuple(int table, const Vector& v) const {
  if (v.size() != params_.dimension)
    throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(v.size()) + " != LSH dimension " +
                                                  std::to_string(params_.dimension));
  const Vector proj = projections_[static_cast<std::size_t>(table)] * v + offsets_[static_cast<std::size_t>(table)];
  std::vector<std::int64_t> out(static_cast<std::size_t>(proj.size()));
  for (Eigen::Index h = 0; h < proj.size(); ++h)
    out[static_cast<std::size_t>(h)] = static_cast<std::int64_t>(std::floor(proj[h] / params_.bucketWidth));
  return out;
}

std::uint64_t LshIndex::bucketKey(int table, const Vector& v) const {
  std::uint64_t key = 0xCBF29CE484222325ull;
  for (auto h : hashTuple(table, v)) key = mix64(key ^ static_cast<std::uint64_t>(h));
  return key;
}

LshIndex LshIndex::build(const std::vector<std::string>& ids, const RowMatrix& vectors, LshParams params,
                         int workers) {
  if (params.tables < 1 || params.hashesPerTable < 1)
    throw Error(ErrorCode::InvalidParameter, "LSH needs at least one table and one hash per table");
  if (static_cast<Eigen::Index>(ids.size()) != vectors.rows())
    throw Error(ErrorCode::InvalidParameter, "LSH ids and vectors differ in count");
  if (params.dimension == 0) params.dimension = static_cast<int>(vectors.cols());
  if (vectors.rows() > 0 && vectors.cols() != params.dimension)
    throw Error(ErrorCode::DimensionMismatch, "vector dimension " + std::to_string(vectors.cols()) +
                                                  " != LSH dimension " + std::to_string(params.dimension));
  if (params.bucketWidth <= 0) params.bucketWidth = estimateBucketWidth(vectors);

  LshIndex index;
  index.params_ = params;
  index.count_ = ids.size();
  index.makeProjections();
  index.tables_.assign(static_cast<std::size_t>(params.tables), {});

  auto buildTable = [&](int t) {
    auto& table = index.tables_[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < vectors.rows(); ++i)
      table[index.bucketKey(t, vectors.row(i).transpose())].push_back(ids[static_cast<std::size_t>(i)]);
  };
  workers = std::max(1, std::min(workers, params.tables));
  if (workers == 1) {
    for (int t = 0; t < params.tables; ++t) buildTable(t);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int t = w; t < params.tables; t += workers) buildTable(t);
      });
  }
  return index;
}

std::vector<std::string> LshIndex::shortlist(const Vector& query) const {
  std::set<std::string> out;
  for (int t = 0; t < params_.tables; ++t) {
    const auto& table = tables_[static_cast<std::size_t>(t)];
    auto it = table.find(bucketKey(t, query));
    if (it != table.end()) out.insert(it->second.begin(), it->second.end());
  }
  return {out.begin(), out.end()};
}

void LshIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json header{{"version", kLshVersion},
                        {"tables", params_.tables},
                        {"hashesPerTable", params_.hashesPerTable},
                        {"bucketWidth", params_.bucketWidth},
                        {"seed", params_.seed},
                        {"dimension", params_.dimension},
                        {"count", count_}};
  {
    std::ofstream out(dir / "header.json", std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write LSH header in " + dir.string());
    out << header.dump(2) << '\n';
  }
  for (int t = 0; t < params_.tables; ++t) {
    std::ofstream out(tablePath(dir, t), std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write LSH table in " + dir.string());
    out.write(kTableMagic, 4);
    detail::writePod<std::uint32_t>(out, kLshVersion);
    const auto& table = tables_[static_cast<std::size_t>(t)];
    detail::writePod<std::uint64_t>(out, table.size());
    for (const auto& [key, bucket] : table) {
      detail::writePod<std::uint64_t>(out, key);
      detail::writePod<std::uint32_t>(out, static_cast<std::uint32_t>(bucket.size()));
      for (const auto& id : bucket) detail::writeString(out, id);
    }
  }
}

LshIndex LshIndex::load(const std::filesystem::path& dir) {
  std::ifstream hin(dir / "header.json");
  if (!hin) throw Error(ErrorCode::Io, "missing LSH header in " + dir.string());
  const auto header = nlohmann::json::parse(hin);
  if (header.at("version").get<std::uint32_t>() != kLshVersion)
    throw Error(ErrorCode::Io, "unsupported LSH version");
  LshIndex index;
  index.params_.tables = header.at("tables").get<int>();
  index.params_.hashesPerTable = header.at("hashesPerTable").get<int>();
  index.params_.bucketWidth = header.at("bucketWidth").get<double>();
  index.params_.seed = header.at("seed").get<std::uint64_t>();
  index.params_.dimension = header.at("dimension").get<int>();
  index.count_ = header.at("count").get<std::size_t>();
  index.makeProjections();
  index.tables_.assign(static_cast<std::size_t>(index.params_.tables), {});
  for (int t = 0; t < index.params_.tables; ++t) {
    std::ifstream in(tablePath(dir, t), std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "missing LSH table " + std::to_string(t));
    detail::expectMagic(in, kTableMagic, "LSH table");
    if (detail::readPod<std::uint32_t>(in) != kLshVersion) throw Error(ErrorCode::Io, "unsupported LSH table version");
    const auto buckets = detail::readPod<std::uint64_t>(in);
    auto& table = index.tables_[static_cast<std::size_t>(t)];
    for (std::uint64_t b = 0; b < buckets; ++b) {
      const auto key = detail::readPod<std::uint64_t>(in);
      const auto n = detail::readPod<std::uint32_t>(in);
      Bucket bucket(n);
      for (auto& id : bucket) id = detail::readString(in);
      table.emplace(key, std::move(bucket));
    }
  }
  return index;
}

}  // namespace imgseek
