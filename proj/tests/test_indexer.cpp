#include "helpers.hpp"

#include "imgseek/storer.hpp"
#include "imgseek/weighting.hpp"

#include <doctest.h>

using namespace imgseek;

namespace {

struct Fixture {
  testing::TempDir tmp;
  ExperimentCorpus corpus = generateSyntheticCorpus({3, 5, 48, 1, 4});

  Fixture() { testing::trainCodebook(corpus, {"dense-sift", 8, 16}, 8, tmp / "cb.bin", 1500); }

  IndexJob job(const std::string& out, IndexConfig config) const {
    IndexJob j;
    j.images = testing::recordsOf(corpus);
    j.config = std::move(config);
    j.configDir = tmp.path();
    j.outputDir = tmp / out;
    j.loader = testing::corpusLoader(corpus);
    return j;
  }
};

ErrorCode codeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an imgseek::Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("indexer") {
  TEST_CASE("index directory layout") {
    Fixture fx;
    auto config = testing::bovwConfig("cb.bin");
    config.weighting.kind = "tfidf";
    config.ann = LshParams{4, 4, 0.0, 3, 0};
    const auto report = runIndex(fx.job("idx", config));
    CHECK(report.ok);
    CHECK(report.input == 15);
    CHECK(report.indexed == 15);
    CHECK(report.failed == 0);
    const auto dir = fx.tmp / "idx";
    for (const char* f : {"index.json", "vocabulary.bin", "descriptors.bin", "weighted.bin", "stats.json",
                          "records.jsonl", "lsh/header.json"})
      CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
    const auto stored = loadConfig(dir / layout::kConfig);
    CHECK(*stored.descriptor.vocabRef == "vocabulary.bin");
    CHECK(loadCodebook(dir / layout::kVocabulary) == loadCodebook(fx.tmp / "cb.bin"));
    const auto raw = openStorer(stored.storer, dir);
    CHECK(raw->count() == 15);
    CHECK(std::is_sorted(raw->ids().begin(), raw->ids().end()));
    const auto stats = loadStats(dir / layout::kStats);
    CHECK(stats.documents == 15);
    const auto records = loadRecords(dir / layout::kRecords);
    CHECK(records.size() == 15);
    CHECK(records.front().caption.has_value());
  }

  TEST_CASE("stored descriptor equals a fresh pipeline describe") {
    Fixture fx;
    runIndex(fx.job("idx", testing::bovwConfig("cb.bin")));
    const auto dir = fx.tmp / "idx";
    const auto config = loadConfig(dir / layout::kConfig);
    const auto pipeline = Pipeline::fromConfig(config, dir);
    const auto store = openStorer(config.storer, dir);
    for (const auto& li : fx.corpus.images)
      CHECK(pipeline.describe(li.image).values == *store->get(li.record.imageId));
  }

  TEST_CASE("serial and sharded runs are byte-identical") {
    Fixture fx;
    auto config = testing::bovwConfig("cb.bin");
    config.ann = LshParams{3, 4, 0.0, 5, 0};
    runIndex(fx.job("serial", config));
    for (auto [workers, shard] : {std::pair{1, std::size_t{1}}, std::pair{3, std::size_t{4}}}) {
      auto job = fx.job("par", config);
      job.mode = {workers, shard};
      const auto report = runIndex(job);
      CHECK(report.shards == (15 + shard - 1) / shard);
      CHECK(testing::snapshot(fx.tmp / "par") == testing::snapshot(fx.tmp / "serial"));
    }
  }

  TEST_CASE("per-image failures are reported, not thrown") {
    Fixture fx;
    auto job = fx.job("idx", testing::globalConfig("hsv-hist"));
    auto inner = job.loader;
    job.loader = [inner](const ImageRecord& r) {
      if (r.imageId == "c01_002") throw Error(ErrorCode::DecodeError, "bad bytes");
      return inner(r);
    };
    const auto report = runIndex(job);
    CHECK(report.indexed == 14);
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0].imageId == "c01_002");
    CHECK(report.toJson().at("failed") == 1);
    CHECK(loadRecords(fx.tmp / "idx" / layout::kRecords).size() == 14);
  }

  TEST_CASE("lost shards are retried once") {
    Fixture fx;
    const auto config = testing::globalConfig("color-layout");
    runIndex(fx.job("ref", config));
    auto flaky = fx.job("flaky", config);
    flaky.mode = {2, 4};
    flaky.shardHook = [](std::size_t shard, int attempt) {
      if (shard == 1 && attempt == 0) throw std::runtime_error("worker lost");
    };
    const auto retried = runIndex(flaky);
    CHECK(retried.ok);
    CHECK(testing::snapshot(fx.tmp / "flaky") == testing::snapshot(fx.tmp / "ref"));

    auto dead = fx.job("dead", config);
    dead.mode = {2, 4};
    dead.shardHook = [](std::size_t shard, int) {
      if (shard == 2) throw std::runtime_error("worker lost");
    };
    const auto failed = runIndex(dead);
    CHECK_FALSE(failed.ok);
    REQUIRE(failed.shardFailures.size() == 1);
    CHECK(failed.shardFailures[0].shardId == 2);
    CHECK(failed.failed == 4);
    CHECK(failed.indexed == 11);
  }

  TEST_CASE("shard manifest round trip") {
    Fixture fx;
    const auto shards = partitionShards(testing::recordsOf(fx.corpus), 4);
    REQUIRE(shards.size() == 4);
    CHECK(shards[3].imageIds.size() == 3);
    writeShardManifest(shards, fx.tmp / "m.jsonl");
    const auto back = readShardManifest(fx.tmp / "m.jsonl");
    REQUIRE(back.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(back[i].imageIds == shards[i].imageIds);
    auto job = fx.job("idx", testing::globalConfig("hsv-hist"));
    job.mode = {2, 4};
    job.manifestPath = fx.tmp / "job.jsonl";
    runIndex(job);
    CHECK(readShardManifest(fx.tmp / "job.jsonl").size() == 4);
  }

  TEST_CASE("job level errors") {
    Fixture fx;
    auto dup = fx.job("idx", testing::globalConfig("hsv-hist"));
    dup.images.push_back(dup.images.front());
    CHECK(codeOf([&] { runIndex(dup); }) == ErrorCode::DuplicateId);
    CHECK(codeOf([&] { runIndex(fx.job("idx", testing::bovwConfig("nope.bin"))); }) == ErrorCode::MissingVocabulary);
    auto invalid = testing::globalConfig("hsv-hist");
    invalid.weighting.kind = "tfidf";
    CHECK(codeOf([&] { runIndex(fx.job("idx", invalid)); }) == ErrorCode::ConfigInvalid);
    testing::writeFile(fx.tmp / "file", "x");
    CHECK(codeOf([&] { runIndex(fx.job("file", testing::globalConfig("hsv-hist"))); }) == ErrorCode::OutputNotWritable);
  }

  TEST_CASE("re-indexing removes stale artifacts") {
    Fixture fx;
    auto config = testing::bovwConfig("cb.bin");
    config.weighting = {"frequent-items", 3};
    config.ann = LshParams{2, 2, 1.0, 1, 0};
    runIndex(fx.job("idx", config));
    CHECK(std::filesystem::exists(fx.tmp / "idx" / layout::kFrequentItems));
    const auto sets = loadFrequentItems(fx.tmp / "idx" / layout::kFrequentItems);
    CHECK(sets.size() == 15);
    for (const auto& s : sets) CHECK(s.items.size() <= 3);
    runIndex(fx.job("idx", testing::bovwConfig("cb.bin")));
    CHECK_FALSE(std::filesystem::exists(fx.tmp / "idx" / layout::kFrequentItems));
    CHECK_FALSE(std::filesystem::exists(fx.tmp / "idx" / layout::kLsh));
    CHECK_FALSE(std::filesystem::exists(fx.tmp / "idx" / layout::kStats));
  }

  TEST_CASE("merged segments equal a single build") {
    Fixture fx;
    auto config = testing::bovwConfig("cb.bin");
    config.weighting.kind = "tfidf";
    config.ann = LshParams{3, 3, 0.0, 8, 0};
    runIndex(fx.job("whole", config));
    auto a = fx.job("segA", config);
    auto b = fx.job("segB", config);
    a.images.resize(7);
    b.images.erase(b.images.begin(), b.images.begin() + 7);
    runIndex(a);
    runIndex(b);
    const auto report = mergeSegments({fx.tmp / "segA", fx.tmp / "segB"}, fx.tmp / "merged");
    CHECK(report.indexed == 15);
    CHECK(testing::snapshot(fx.tmp / "merged") == testing::snapshot(fx.tmp / "whole"));
    CHECK(codeOf([&] { mergeSegments({fx.tmp / "segA", fx.tmp / "segA"}, fx.tmp / "m2"); }) ==
          ErrorCode::DuplicateId);
    runIndex(fx.job("other", testing::globalConfig("hsv-hist")));
    CHECK(codeOf([&] { mergeSegments({fx.tmp / "segA", fx.tmp / "other"}, fx.tmp / "m3"); }) ==
          ErrorCode::ConfigInvalid);
  }

  TEST_CASE("image records JSON") {
    ImageRecord r{"id1", "a/b.png", "a caption", std::nullopt, "https://example.org/x"};
    CHECK(recordFromJson(toJson(r)) == r);
    CHECK(toJson(r).contains("caption"));
    CHECK_FALSE(toJson(r).contains("modality"));
  }
}
