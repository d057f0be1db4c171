#include "helpers.hpp"

#include "imgseek/ann.hpp"

#include <doctest.h>

#include <algorithm>

using namespace imgseek;

namespace {

std::vector<std::string> idsFor(Eigen::Index n) {
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < n; ++i) ids.push_back("p" + std::to_string(1000 + i));
  return ids;
}

}  // namespace

TEST_SUITE("ann") {
  TEST_CASE("counter-based generators are reproducible and in range") {
    double sum = 0.0;
    for (std::uint64_t i = 0; i < 20000; ++i) {
      const double u = counterUniform(3, 1, i);
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      sum += u;
    }
    CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
    CHECK(counterUniform(3, 1, 7) == counterUniform(3, 1, 7));
    CHECK(counterUniform(3, 1, 7) != counterUniform(3, 2, 7));
    double m = 0.0, m2 = 0.0;
    for (std::uint64_t i = 0; i < 20000; ++i) {
      const double z = counterNormal(5, 0, i);
      m += z;
      m2 += z * z;
    }
    CHECK(std::abs(m / 20000) < 0.05);
    CHECK(m2 / 20000 == doctest::Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("bucket width estimate is a tenth of the mean pairwise distance") {
    RowMatrix v(3, 2);
    v << 0, 0, 3, 4, 0, 8;
    CHECK(estimateBucketWidth(v) == doctest::Approx(0.1 * (5 + 8 + 5) / 3.0));
    CHECK(estimateBucketWidth(RowMatrix::Zero(1, 3)) == 1.0);
  }

  TEST_CASE("every indexed point is in its own shortlist") {
    const RowMatrix v = RowMatrix::Random(200, 6);
    const auto ids = idsFor(200);
    const auto lsh = LshIndex::build(ids, v, {6, 4, 0.5, 3, 0});
    CHECK(lsh.indexedCount() == 200);
    CHECK(lsh.params().dimension == 6);
    for (Eigen::Index i = 0; i < 200; ++i) {
      const auto s = lsh.shortlist(v.row(i).transpose());
      CHECK(std::is_sorted(s.begin(), s.end()));
      CHECK(std::binary_search(s.begin(), s.end(), ids[static_cast<std::size_t>(i)]));
    }
  }

  TEST_CASE("near points collide more than far points") {
    const RowMatrix base = RowMatrix::Random(1, 8);
    RowMatrix v(3, 8);
    v.row(0) = base;
    v.row(1) = base.array() + 1e-4;
    v.row(2) = base.array() + 50.0;
    const auto lsh = LshIndex::build({"a", "b", "c"}, v, {20, 4, 1.0, 9, 0});
    int near = 0, far = 0;
    for (int t = 0; t < 20; ++t) {
      near += lsh.bucketKey(t, v.row(0).transpose()) == lsh.bucketKey(t, v.row(1).transpose());
      far += lsh.bucketKey(t, v.row(0).transpose()) == lsh.bucketKey(t, v.row(2).transpose());
    }
    CHECK(near >= 18);
    CHECK(far == 0);
    CHECK(lsh.hashTuple(0, v.row(0).transpose()).size() == 4);
  }

  TEST_CASE("build is independent of worker count and survives save/load") {
    testing::TempDir tmp;
    const RowMatrix v = RowMatrix::Random(150, 5);
    const auto ids = idsFor(150);
    const LshParams params{5, 3, 0.0, 21, 0};
    const auto one = LshIndex::build(ids, v, params, 1);
    const auto three = LshIndex::build(ids, v, params, 3);
    for (int t = 0; t < 5; ++t) CHECK(one.table(t) == three.table(t));
    one.save(tmp / "a");
    three.save(tmp / "b");
    CHECK(testing::snapshot(tmp / "a") == testing::snapshot(tmp / "b"));
    const auto back = LshIndex::load(tmp / "a");
    CHECK(back.params() == one.params());
    for (Eigen::Index i = 0; i < 150; i += 7)
      CHECK(back.shortlist(v.row(i).transpose()) == one.shortlist(v.row(i).transpose()));
  }

  TEST_CASE("invalid input is rejected") {
    const RowMatrix v = RowMatrix::Random(4, 3);
    CHECK_THROWS_AS(LshIndex::build(idsFor(3), v, {}), Error);
    CHECK_THROWS_AS(LshIndex::build(idsFor(4), v, {0, 4, 1.0, 1, 0}), Error);
    const auto lsh = LshIndex::build(idsFor(4), v, {2, 2, 1.0, 1, 0});
    CHECK_THROWS_AS(lsh.shortlist(Vector::Zero(4)), Error);
    testing::TempDir tmp;
    CHECK_THROWS_AS(LshIndex::load(tmp.path()), Error);
  }
}
