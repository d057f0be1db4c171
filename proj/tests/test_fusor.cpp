#include "fusion_oracle.hpp"

#include <doctest.h>

using namespace imgseek;

namespace {

ScoredList list(std::vector<ScoredEntry> entries, Polarity polarity = Polarity::Similarity) {
  ScoredList l;
  l.polarity = polarity;
  l.entries = std::move(entries);
  return l;
}

double scoreOf(const ScoredList& l, const std::string& id) {
  for (const auto& e : l.entries)
    if (e.imageId == id) return e.score;
  return std::nan("");
}

}  // namespace

TEST_SUITE("fusor") {
  TEST_CASE("borda of ranks 1 and 2") {
    const auto a = list({{"x", 0.9}, {"y", 0.5}});
    const auto b = list({{"y", 0.8}, {"x", 0.1}});
    FusionRule r;
    r.name = "borda";
    const auto out = fuse({a, b}, r, 10);
    CHECK(scoreOf(out, "x") == 1.5);
    CHECK(scoreOf(out, "y") == 1.5);
    CHECK(out.ids() == std::vector<std::string>{"x", "y"});
  }

  TEST_CASE("rrf uses 1/(c + rank)") {
    FusionRule r;
    r.name = "rrf";
    r.c = 60;
    const auto out = fuse({list({{"a", 3}, {"b", 2}}), list({{"b", 7}})}, r, 10);
    CHECK(scoreOf(out, "a") == doctest::Approx(1.0 / 61));
    CHECK(scoreOf(out, "b") == doctest::Approx(1.0 / 62 + 1.0 / 61));
  }

  TEST_CASE("score rules on a hand example") {
    // After min-max: A = {a:1, b:0.5, c:0}, B = {b:1, d:0}.
    const auto A = list({{"a", 4}, {"b", 3}, {"c", 2}});
    const auto B = list({{"b", 9}, {"d", 1}});
    FusionRule r;
    r.name = "combSUM";
    CHECK(scoreOf(fuse({A, B}, r, 10), "b") == 1.5);
    r.name = "combMNZ";
    CHECK(scoreOf(fuse({A, B}, r, 10), "b") == 3.0);
    CHECK(scoreOf(fuse({A, B}, r, 10), "a") == 1.0);
    r.name = "combMAX";
    CHECK(scoreOf(fuse({A, B}, r, 10), "b") == 1.0);
    r.name = "combMIN";
    CHECK(scoreOf(fuse({A, B}, r, 10), "b") == 0.5);
    r.name = "linear";
    r.weights = {0.25, 0.75};
    CHECK(scoreOf(fuse({A, B}, r, 10), "b") == 0.875);
    CHECK(scoreOf(fuse({A, B}, r, 10), "a") == 0.25);
  }

  TEST_CASE("distance lists are converted before fusion") {
    FusionRule r;
    r.name = "combSUM";
    r.normalizeScores = false;
    const auto out = fuse({list({{"near", 0.0}, {"far", 3.0}}, Polarity::Distance)}, r, 10);
    CHECK(out.ids() == std::vector<std::string>{"near", "far"});
    CHECK(scoreOf(out, "far") == 0.25);
  }

  TEST_CASE("constant list normalises to one") {
    const auto n = minMaxNormalized(list({{"a", 2}, {"b", 2}}));
    CHECK(n.entries[0].score == 1.0);
    CHECK(n.entries[1].score == 1.0);
  }

  TEST_CASE("all rules match the dense oracle") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 60; ++trial) {
      const auto lists = testing::randomListSet(rng, 4, 30);
      for (const auto& name : fusionRuleNames()) {
        auto rule = testing::ruleFor(name, lists.size(), rng);
        rule.normalizeScores = trial % 4 != 0;
        const auto got = fuse(lists, rule, 100000);
        const auto want = testing::denseFusion(lists, rule);
        CHECK(testing::sameRanking(got, want, 1e-12));
      }
    }
  }

  TEST_CASE("combMNZ is F times combSUM") {
    std::mt19937_64 rng(78);
    for (int trial = 0; trial < 40; ++trial) {
      const auto lists = testing::randomListSet(rng, 5, 20);
      FusionRule sum, mnz;
      sum.name = "combSUM";
      mnz.name = "combMNZ";
      const auto s = fuse(lists, sum, 100000);
      const auto m = fuse(lists, mnz, 100000);
      for (const auto& e : m.entries) {
        int f = 0;
        for (const auto& l : lists)
          for (const auto& x : l.entries) f += x.imageId == e.imageId;
        CHECK(std::abs(e.score - f * scoreOf(s, e.imageId)) <= 1e-12);
      }
    }
  }

  TEST_CASE("fused output is well formed and truncated") {
    std::mt19937_64 rng(79);
    const auto lists = testing::randomListSet(rng, 3, 40);
    FusionRule r;
    const auto out = fuse(lists, r, 5);
    CHECK(out.size() <= 5);
    CHECK(out.wellFormed());
    CHECK(out.polarity == Polarity::Similarity);
  }

  TEST_CASE("invalid input") {
    FusionRule r;
    try {
      fuse({}, r, 10);
      FAIL("expected EmptyInput");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyInput);
    }
    r.name = "linear";
    r.weights = {0.5};
    try {
      fuse({list({{"a", 1}}), list({{"a", 1}})}, r, 10);
      FAIL("expected WeightMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WeightMismatch);
    }
    r.weights = {0.5, 0.6};
    try {
      fuse({list({{"a", 1}}), list({{"a", 1}})}, r, 10);
      FAIL("expected WeightsNotNormalized");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WeightsNotNormalized);
    }
    r.name = "combSUM";
    CHECK_THROWS_AS(fuse({list({{"a", 1}, {"b", 2}})}, r, 10), Error);
    CHECK_THROWS_AS(fuse({list({{"a", 2}, {"a", 1}})}, r, 10), Error);
    r.name = "condorcet";
    CHECK_THROWS_AS(fuse({list({{"a", 1}})}, r, 10), Error);
    CHECK_THROWS_AS(makeFusor(r), Error);
  }

  TEST_CASE("registry builds configured fusors") {
    CHECK(fusionRuleNames().size() == 7);
    const auto f = fusorRegistry().select("rrf", {{"c", 10}});
    CHECK(f->rule().c == 10);
    const auto out = f->fuse({list({{"a", 1}})}, 10);
    CHECK(out.entries[0].score == doctest::Approx(1.0 / 11));
  }
}
