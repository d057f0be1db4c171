#include "helpers.hpp"

#include <doctest.h>

using namespace imgseek;

namespace {

RowMatrix blobs(int perBlob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  const double centres[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  RowMatrix m(3 * perBlob, 2);
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < perBlob; ++i) {
      m(b * perBlob + i, 0) = centres[b][0] + noise(rng);
      m(b * perBlob + i, 1) = centres[b][1] + noise(rng);
    }
  return m;
}

}  // namespace

TEST_SUITE("vocabulary") {
  TEST_CASE("k-means recovers well separated blobs") {
    KMeansOptions opts;
    opts.k = 3;
    const auto result = trainKMeans(blobs(50, 1), opts, "toy");
    REQUIRE(result.codebook.k() == 3);
    CHECK(result.codebook.featureId == "toy");
    int found = 0;
    for (const auto& c : {Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0), Eigen::Vector2d(0, 10)})
      for (Eigen::Index i = 0; i < 3; ++i)
        if ((result.codebook.centroids.row(i).transpose() - c).norm() < 0.1) ++found;
    CHECK(found == 3);
  }

  TEST_CASE("inertia never increases") {
    KMeansOptions opts;
    opts.k = 8;
    opts.maxIters = 30;
    RowMatrix samples = RowMatrix::Random(400, 5);
    const auto r = trainKMeans(samples, opts);
    for (std::size_t i = 1; i < r.inertia.size(); ++i) CHECK(r.inertia[i] <= r.inertia[i - 1] * (1 + 1e-12));
  }

  TEST_CASE("same seed gives the same codebook regardless of workers") {
    RowMatrix samples = RowMatrix::Random(300, 4);
    KMeansOptions a;
    a.k = 6;
    KMeansOptions b = a;
    b.workers = 3;
    CHECK(trainKMeans(samples, a).codebook == trainKMeans(samples, b).codebook);
    KMeansOptions c = a;
    c.seed = 99;
    CHECK_FALSE(trainKMeans(samples, a).codebook.centroids == trainKMeans(samples, c).codebook.centroids);
  }

  TEST_CASE("too few samples and bad input are rejected") {
    KMeansOptions opts;
    opts.k = 10;
    try {
      trainKMeans(RowMatrix::Random(5, 2), opts);
      FAIL("expected TooFewSamples");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TooFewSamples);
    }
    opts.k = 2;
    std::vector<Vector> ragged{Vector::Zero(2), Vector::Zero(3), Vector::Ones(2)};
    CHECK_THROWS_AS(trainKMeans(ragged, opts), Error);
    RowMatrix withNan = RowMatrix::Zero(4, 2);
    withNan(1, 1) = std::nan("");
    CHECK_THROWS_AS(trainKMeans(withNan, opts), Error);
  }

  TEST_CASE("assignment picks the nearest centroid, lowest index on ties") {
    Codebook cb;
    cb.centroids = RowMatrix(3, 2);
    cb.centroids << 0, 0, 2, 0, 2, 0;
    CHECK(assign(Eigen::Vector2d(0.4, 0), cb) == 0);
    CHECK(assign(Eigen::Vector2d(1.9, 0), cb) == 1);
    CHECK(assign(Eigen::Vector2d(1.0, 0), cb) == 0);
    CHECK_THROWS_AS(assign(Eigen::Vector3d(0, 0, 0), cb), Error);
  }

  TEST_CASE("codebook files round trip bit-exactly") {
    testing::TempDir tmp;
    KMeansOptions opts;
    opts.k = 4;
    opts.seed = 12;
    const auto cb = trainKMeans(RowMatrix::Random(100, 7), opts, "dense-sift").codebook;
    saveCodebook(cb, tmp / "cb.bin");
    CHECK(loadCodebook(tmp / "cb.bin") == cb);
    const auto header = readCodebookHeader(tmp / "cb.bin");
    CHECK(header.k == 4);
    CHECK(header.d == 7);
    CHECK(header.featureId == "dense-sift");
    CHECK(header.seed == 12);
    testing::writeFile(tmp / "bad.bin", "not a codebook");
    CHECK_THROWS_AS(loadCodebook(tmp / "bad.bin"), Error);
    CHECK_THROWS_AS(loadCodebook(tmp / "missing.bin"), Error);
  }
}
