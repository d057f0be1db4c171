#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace imgseek;

namespace {

ScoredList ranked(const std::vector<std::string>& ids) {
  ScoredList l;
  for (std::size_t i = 0; i < ids.size(); ++i) l.entries.push_back({ids[i], static_cast<double>(ids.size() - i)});
  return l;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("average precision worked examples") {
    // Relevant at ranks 1 and 3 out of 3 relevant: (1/1 + 2/3) / 3.
    CHECK(averagePrecision(ranked({"a", "x", "b", "y"}), {"a", "b", "c"}) == doctest::Approx((1.0 + 2.0 / 3) / 3));
    CHECK(averagePrecision(ranked({"a", "b"}), {"a", "b"}) == 1.0);
    CHECK(averagePrecision(ranked({"x", "y"}), {"a"}) == 0.0);
    CHECK(averagePrecision(ranked({}), {"a"}) == 0.0);
    CHECK_THROWS_AS(averagePrecision(ranked({"a"}), {}), Error);
  }

  TEST_CASE("mean average precision skips unjudged topics") {
    RunResult run;
    run.topics["t1"] = ranked({"a", "b"});
    run.topics["t2"] = ranked({"x", "c"});
    run.topics["t3"] = ranked({"a"});
    Qrels qrels{{"t1", {"a"}}, {"t2", {"c"}}, {"t3", {}}};
    const auto s = meanAveragePrecision(run, qrels);
    CHECK(s.scoredTopics == 2);
    CHECK(s.unjudgedTopics == 1);
    CHECK(s.perTopic.at("t2") == 0.5);
    CHECK(s.map == doctest::Approx(0.75));
  }

  TEST_CASE("TREC run and qrels round trip") {
    testing::TempDir tmp;
    RunResult run;
    run.topics["q1"] = ranked({"a", "b", "c"});
    ScoredList dist;
    dist.polarity = Polarity::Distance;
    dist.entries = {{"z", 0.0}, {"y", 1.0}};
    run.topics["q2"] = dist;
    writeRun(run, tmp / "run.txt", "tag");
    const auto back = readRun(tmp / "run.txt");
    CHECK(back.descriptor == "tag");
    CHECK(back.topics.at("q1").ids() == run.topics.at("q1").ids());
    CHECK(back.topics.at("q1").entries[0].score == 3.0);
    CHECK(back.topics.at("q2").ids() == std::vector<std::string>{"z", "y"});
    CHECK(back.topics.at("q2").entries[0].score == 1.0);
    CHECK(back.topics.at("q2").entries[1].score == 0.5);

    Qrels q{{"q1", {"a", "c"}}, {"q2", {"y"}}};
    writeQrels(q, tmp / "qrels.txt");
    CHECK(readQrels(tmp / "qrels.txt") == q);
    testing::writeFile(tmp / "zero.txt", "q1 0 a 0\nq1 0 b 2\n");
    CHECK(readQrels(tmp / "zero.txt").at("q1") == std::set<std::string>{"b"});

    testing::writeFile(tmp / "bad.txt", "q1 Q0 a\n");
    CHECK_THROWS_AS(readRun(tmp / "bad.txt"), Error);
    testing::writeFile(tmp / "dup.txt", "q1 Q0 a 1 2.0 t\nq1 Q0 a 2 1.0 t\n");
    CHECK_THROWS_AS(readRun(tmp / "dup.txt"), Error);
    CHECK_THROWS_AS(readQrels(tmp / "missing"), Error);
  }

  TEST_CASE("synthetic corpus is deterministic and labelled") {
    const auto a = generateSyntheticCorpus({3, 4, 32, 2, 5});
    const auto b = generateSyntheticCorpus({3, 4, 32, 2, 5});
    REQUIRE(a.images.size() == 12);
    for (std::size_t i = 0; i < a.images.size(); ++i) {
      CHECK(a.images[i].image == b.images[i].image);
      CHECK(a.images[i].record == b.images[i].record);
    }
    CHECK(a.images[5].record.imageId == "c01_001");
    CHECK(*a.images[5].record.caption == "green banded texture group class1 specimen 1");
    CHECK(*a.images[5].record.modality == "ct");
    CHECK(a.qrels.at("class2").size() == 4);
    CHECK(a.topicQueries.at("class0") == std::vector<std::string>{"c00_000", "c00_001"});
    CHECK(a.find("c02_003") != nullptr);
    CHECK(a.find("nope") == nullptr);
    const auto c = generateSyntheticCorpus({3, 4, 32, 2, 6});
    CHECK_FALSE(c.images[0].image == a.images[0].image);
    CHECK_THROWS_AS(generateSyntheticCorpus({0, 4, 32, 2, 5}), Error);
  }

  TEST_CASE("labelled folders load one topic per directory") {
    testing::TempDir tmp;
    const auto corpus = generateSyntheticCorpus({2, 3, 24, 1, 9});
    for (const auto& li : corpus.images) {
      std::filesystem::create_directories(tmp / li.label);
      savePng(li.image, tmp / li.label / (li.record.imageId + ".png"));
    }
    const auto back = loadLabeledFolder(tmp.path(), 1);
    REQUIRE(back.images.size() == 6);
    CHECK(back.images[0].record.imageId == "class0/c00_000");
    CHECK(back.images[0].image == corpus.images[0].image);
    CHECK(back.qrels.at("class1").size() == 3);
    CHECK(back.topicQueries.at("class1").size() == 1);
    CHECK_THROWS_AS(loadLabeledFolder(tmp / "missing"), Error);
  }

  TEST_CASE("matrix experiment writes the four tables") {
    testing::TempDir tmp;
    const auto corpus = generateSyntheticCorpus({3, 4, 40, 1, 3});
    ExperimentGrid grid;
    grid.features = {defaultFeaturePresets()[0], defaultFeaturePresets()[3]};
    grid.vocabSizes = {4, 6};
    grid.metrics = {"histogram-intersection", "euclidean"};
    grid.representations = {"bovw", "vlad"};
    grid.representationVocabSizes = {4};
    grid.fusionRules = {"combMNZ", "rrf"};
    grid.globalDescriptors = {"hsv-hist", "color-layout"};
    grid.maxTrainingSamples = 800;
    const auto t = runMatrixExperiment(corpus, grid, tmp.path());
    for (const char* f : {"table1.csv", "table2.csv", "table3.csv", "table4.csv"})
      CHECK_MESSAGE(std::filesystem::exists(tmp / f), f);
    CHECK(t.features.rows.size() == 2);
    CHECK(t.features.columns == std::vector<std::string>{"feature", "histogram-intersection", "euclidean"});
    CHECK(t.fusion.rows.size() == 2);
    CHECK(t.representations.columns.size() == 3);
    CHECK(t.descriptors.rows.size() == 4);
    for (const auto* table : {&t.features, &t.fusion, &t.representations})
      for (const auto& [label, values] : table->rows)
        for (double v : values) CHECK((v >= 0.0 && v <= 1.0));
    const auto csv = testing::readFile(tmp / "table1.csv");
    CHECK(csv.rfind("feature,histogram-intersection,euclidean\nsift16,", 0) == 0);
    CHECK(testing::readFile(tmp / "table4.csv").find("n/a") != std::string::npos);

    ExperimentGrid big = grid;
    big.vocabSizes = {100000};
    CHECK_THROWS_AS(runMatrixExperiment(corpus, big, tmp / "big"), Error);
    ExperimentCorpus tiny;
    CHECK_THROWS_AS(runMatrixExperiment(tiny, grid, tmp / "tiny"), Error);
  }
}
