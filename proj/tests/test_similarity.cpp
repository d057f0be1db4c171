#include "imgseek/similarity.hpp"

#include <doctest.h>

#include <random>

using namespace imgseek;

namespace {

Vector randomHistogram(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = u(rng) < 0.2 ? 0.0 : u(rng);
  return v;
}

}  // namespace

TEST_SUITE("similarity") {
  TEST_CASE("literal values") {
    const Eigen::Vector3d p(1, 0, 2);
    const Eigen::Vector3d q(0, 0, 4);
    CHECK(euclidean(p, q) == doctest::Approx(std::sqrt(5.0)));
    CHECK(manhattan(p, q) == 3.0);
    CHECK(canberra(p, q) == doctest::Approx(1.0 + 2.0 / 6.0));
    CHECK(chi2(p, q) == doctest::Approx(0.5 * (1.0 + 4.0 / 6.0)));
    CHECK(histogramIntersection(p, q) == 2.0);
    CHECK(cosine(p, q) == doctest::Approx(8.0 / (std::sqrt(5.0) * 4.0)));
    CHECK(hamming(p, q) == 1.0);
    CHECK(frequentItemSimilarity(p, q) == 1.0);
    // Only the third bin has both entries positive.
    CHECK(jeffrey(p, q) == doctest::Approx(std::log(4.0 / 6.0) + std::log(8.0 / 6.0)));
    CHECK(jeffreyStandard(p, q) ==
          doctest::Approx(1 * std::log(2.0) + 2 * std::log(4.0 / 6.0) + 4 * std::log(8.0 / 6.0)));
  }

  TEST_CASE("edge cases") {
    const Vector zero = Vector::Zero(4);
    CHECK(cosine(zero, Vector::Ones(4)) == 0.0);
    CHECK(chi2(zero, zero) == 0.0);
    CHECK(canberra(zero, zero) == 0.0);
    CHECK_THROWS_AS(euclidean(Vector::Zero(3), Vector::Zero(4)), Error);
    CHECK_THROWS_AS(chi2(Eigen::Vector2d(-1, 0), Eigen::Vector2d(0, 0)), Error);
    CHECK_THROWS_AS(histogramIntersection(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, -1)), Error);
  }

  TEST_CASE("printed Jeffrey form is non-positive and zero on the diagonal") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
      const Vector p = randomHistogram(rng, 16);
      const Vector q = randomHistogram(rng, 16);
      CHECK(jeffrey(p, q) <= 1e-12);
      CHECK(std::abs(jeffrey(p, p)) < 1e-12);
      CHECK(jeffreyStandard(p, q) >= -1e-12);
    }
  }

  TEST_CASE("symmetry and identity for every registered metric") {
    std::mt19937_64 rng(8);
    for (const auto& name : metricNames()) {
      const Metric& m = metricByName(name);
      for (int i = 0; i < 200; ++i) {
        const Vector p = randomHistogram(rng, 12);
        const Vector q = randomHistogram(rng, 12);
        CHECK(std::abs(m(p, q) - m(q, p)) <= 1e-9);
        if (m.polarity == Polarity::Distance) CHECK(std::abs(m(p, p)) <= 1e-9);
      }
    }
  }

  TEST_CASE("similarity polarity maximises at identity") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
      Vector p = randomHistogram(rng, 10);
      p /= p.sum();
      const Vector q = randomHistogram(rng, 10);
      CHECK(histogramIntersection(p, p) == doctest::Approx(1.0));
      if (p.norm() > 0 && q.norm() > 0) CHECK(cosine(p, q) <= cosine(p, p) + 1e-12);
    }
  }

  TEST_CASE("triangle inequality for true metrics") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n(0, 1);
    for (const char* name : {"euclidean", "manhattan", "hamming"}) {
      const Metric& m = metricByName(name);
      for (int i = 0; i < 300; ++i) {
        Vector a(9), b(9), c(9);
        for (int j = 0; j < 9; ++j) {
          a[j] = rng() % 3 == 0 ? 0.0 : n(rng);
          b[j] = rng() % 3 == 0 ? 0.0 : n(rng);
          c[j] = rng() % 3 == 0 ? 0.0 : n(rng);
        }
        CHECK(m(a, c) <= m(a, b) + m(b, c) + 1e-9);
      }
    }
  }

  TEST_CASE("packed hamming matches the dense support count") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
      BinaryDescriptorVector a("b", 130), b("b", 130);
      for (std::size_t j = 0; j < 130; ++j) {
        a.set(j, rng() % 2);
        b.set(j, rng() % 2);
      }
      CHECK(static_cast<double>(hamming(a, b)) == hamming(a.toDense(), b.toDense()));
    }
    CHECK_THROWS_AS(hamming(BinaryDescriptorVector("b", 3), BinaryDescriptorVector("b", 4)), Error);
  }

  TEST_CASE("frequent-item sets count shared items") {
    CHECK(frequentItemSimilarity(std::vector<int>{1, 3, 5, 9}, std::vector<int>{3, 4, 5}) == 2);
    CHECK(frequentItemSimilarity(std::vector<int>{}, std::vector<int>{1}) == 0);
  }

  TEST_CASE("metric table") {
    CHECK(metricNames().size() == 10);
    CHECK(metricByName("cosine").polarity == Polarity::Similarity);
    CHECK(metricByName("chi2").requiresNonNegative);
    CHECK(metricByName("jeffrey-standard").requiresNonNegative);
    CHECK_FALSE(metricByName("euclidean").requiresNonNegative);
    try {
      metricByName("mahalanobis");
      FAIL("expected UnknownMetric");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownMetric);
    }
  }
}
