#include "helpers.hpp"

#include "imgseek/weighting.hpp"

#include <doctest.h>

#include <cmath>

using namespace imgseek;

TEST_SUITE("weighting") {
  TEST_CASE("two-document worked example") {
    const Vector a = Eigen::Vector2d(2, 0);
    const Vector b = Eigen::Vector2d(1, 1);
    const auto stats = collectionStats({a, b});
    CHECK(stats.documents == 2);
    CHECK(stats.documentFrequency == std::vector<std::uint64_t>{2, 1});
    const auto wa = tfidfWeight({"bovw", a, false}, stats);
    const auto wb = tfidfWeight({"bovw", b, false}, stats);
    CHECK(wa.values[0] == 0.0);
    CHECK(wa.values[1] == 0.0);
    CHECK(wb.values[0] == 0.0);
    CHECK(std::abs(wb.values[1] - 0.5 * std::log(2.0)) < 1e-12);
  }

  TEST_CASE("term weight edge cases") {
    CHECK(tfidfTerm(3, 10, 5, 5) == 0.0);
    CHECK(tfidfTerm(3, 10, 0, 5) == 0.0);
    CHECK(tfidfTerm(3, 0, 2, 5) == 0.0);
    CHECK(tfidfTerm(3, 10, 1, 4) == doctest::Approx(0.3 * std::log(4.0)));
  }

  TEST_CASE("weights are invariant to rescaling the histogram") {
    std::mt19937_64 rng(4);
    std::vector<Vector> docs;
    for (int i = 0; i < 20; ++i) {
      Vector v(8);
      for (auto& x : v) x = static_cast<double>(rng() % 4);
      docs.push_back(v);
    }
    const auto stats = collectionStats(docs);
    for (const auto& d : docs) {
      const auto raw = tfidfWeight({"bovw", d, false}, stats).values;
      const auto scaled = tfidfWeight({"bovw", d * 0.37, false}, stats).values;
      CHECK((raw - scaled).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("stats accumulate associatively") {
    std::mt19937_64 rng(12);
    std::vector<Vector> docs;
    for (int i = 0; i < 30; ++i) {
      Vector v = Vector::Zero(6);
      for (int j = 0; j < 6; ++j)
        if (rng() % 3 == 0) v[j] = 1;
      docs.push_back(v);
    }
    StatsAccumulator left(6), right(6);
    for (int i = 0; i < 30; ++i) (i < 11 ? left : right).add(docs[static_cast<std::size_t>(i)]);
    left.merge(right);
    CHECK(left.stats() == collectionStats(docs));
    StatsAccumulator wrong(5);
    CHECK_THROWS_AS(wrong.add(docs[0]), Error);
  }

  TEST_CASE("frequent item selection") {
    const Vector w = (Vector(6) << 0.1, 0.0, 0.5, 0.5, -1.0, 0.3).finished();
    CHECK(selectFrequentItems(w, 2) == std::vector<int>{2, 3});
    CHECK(selectFrequentItems(w, 3) == std::vector<int>{2, 3, 5});
    CHECK(selectFrequentItems(w, 10) == std::vector<int>{0, 2, 3, 5});
    CHECK(indicatorVector({1, 3}, 5) == (Vector(5) << 0, 1, 0, 1, 0).finished());
  }

  TEST_CASE("stats and frequent items persist") {
    testing::TempDir tmp;
    const CollectionStats stats{7, {1, 0, 7}};
    saveStats(stats, tmp / "stats.json");
    CHECK(loadStats(tmp / "stats.json") == stats);
    const std::vector<FrequentItemSet> sets{{"a", {1, 4}}, {"b", {}}};
    saveFrequentItems(sets, tmp / "fi.jsonl");
    CHECK(loadFrequentItems(tmp / "fi.jsonl") == sets);
  }
}
