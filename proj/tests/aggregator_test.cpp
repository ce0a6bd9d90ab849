#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "autofl/aggregator.hpp"
#include "autofl/errors.hpp"
#include "test_support.hpp"

namespace autofl {
namespace {

using testing::worked_example_records;
using testing::worked_example_snapshot;
using testing::record;

MethodSignature m(const char* name) { return {"Calc", name, {}}; }

std::vector<std::string> names(const FLReport& r) {
  std::vector<std::string> out;
  for (const auto& e : r.ranked) out.push_back(e.signature.method_name);
  return out;
}

TEST(ScoreMethods, WorkedExampleScores) {
  const auto scores = score_methods(worked_example_records());
  EXPECT_DOUBLE_EQ(scores.at(m("A")), 0.1);
  EXPECT_DOUBLE_EQ(scores.at(m("B")), 0.6);
  EXPECT_DOUBLE_EQ(scores.at(m("C")), 0.1);
  EXPECT_DOUBLE_EQ(scores.at(m("D")), 0.2);
  EXPECT_EQ(scores.size(), 4u);
}

TEST(ScoreMethods, UnanimousAndAllErroneous) {
  std::vector<RunRecord> same;
  for (std::size_t k = 0; k < 5; ++k) same.push_back(record(k, {"M"}));
  EXPECT_DOUBLE_EQ(score_methods(same).at(m("M")), 1.0);

  std::vector<RunRecord> broken;
  for (std::size_t k = 0; k < 5; ++k) broken.push_back(record(k, {"M"}, RunStatus::length_error));
  for (const auto& [sig, score] : score_methods(broken)) EXPECT_EQ(score, 0.0);
}

TEST(ScoreMethods, ErroneousRunsStillCountInR) {
  auto records = worked_example_records();
  records.push_back(record(5, {}, RunStatus::transport_error));
  EXPECT_DOUBLE_EQ(score_methods(records).at(m("B")), 3.0 / 6.0);
}

TEST(Rank, WorkedExampleRanking) {
  const auto s = worked_example_snapshot();
  const auto report = rank(worked_example_records(), s);
  EXPECT_EQ(names(report), (std::vector<std::string>{"B", "D", "A", "C", "E"}));
  EXPECT_EQ(report.ranked[0].score, 0.6);
  EXPECT_EQ(report.ranked[4].provenance, Provenance::appended);
  EXPECT_EQ(report.ranked[4].score, 0.0);
  EXPECT_EQ(report.confidence, 0.6);
  EXPECT_EQ(confidence(report, s), 0.6);
  EXPECT_EQ(report.run_ids, (std::vector<std::string>{"run-1", "run-2", "run-3", "run-4", "run-5"}));
}

TEST(Rank, AppendedOrderUsesCoverageThenMentionsThenSource) {
  const auto s = testing::make_snapshot({{"p", {"T::1"}},
                                         {"one", {"T::1"}},
                                         {"two", {"T::1", "T::2"}},
                                         {"quiet", {"T::2"}},
                                         {"loud", {"T::2"}}},
                                        {"T::1", "T::2"});
  auto r = record(0, {"p"});
  FunctionCallLogEntry entry;
  entry.mentioned_signatures = {m("loud")};
  r.function_log = {entry, entry};
  const auto report = rank(std::vector<RunRecord>{r}, s);
  EXPECT_EQ(names(report), (std::vector<std::string>{"p", "two", "loud", "one", "quiet"}));
}

TEST(Rank, UncoveredPredictionsAreNotConfidence) {
  const auto s = testing::make_snapshot({{"covered", {"CalcTest::t1"}}, {"other", {}}});
  std::vector<RunRecord> records{record(0, {"other"}), record(1, {"other"})};
  const auto report = rank(records, s);
  EXPECT_EQ(report.confidence, 0.0);
  EXPECT_EQ(names(report), (std::vector<std::string>{"other", "covered"}));
}

TEST(Rank, AllErroneousGivesCoverageOnly) {
  const auto s = worked_example_snapshot();
  std::vector<RunRecord> records{record(0, {}, RunStatus::parse_empty), record(1, {}, RunStatus::length_error)};
  const auto report = rank(records, s);
  EXPECT_EQ(report.confidence, 0.0);
  EXPECT_EQ(report.ranked.size(), 5u);
  for (const auto& e : report.ranked) EXPECT_EQ(e.provenance, Provenance::appended);
}

TEST(Rank, TieBrokenByEarliestRunThenPosition) {
  const auto s = worked_example_snapshot();
  std::vector<RunRecord> records{record(0, {"C", "A"}), record(1, {"B", "D"})};
  EXPECT_EQ(names(rank(records, s)), (std::vector<std::string>{"C", "A", "B", "D", "E"}));
}

TEST(RankProperty, StableUnderRecordShuffle) {
  const auto s = worked_example_snapshot();
  std::mt19937 rng(5);
  const char* all[] = {"A", "B", "C", "D", "E"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RunRecord> records;
    const int runs = 1 + rng() % 6;
    for (int k = 0; k < runs; ++k) {
      RunRecord r = record(k, {}, rng() % 5 == 0 ? RunStatus::parse_empty : RunStatus::ok);
      if (r.status == RunStatus::ok) {
        for (const char* n : all) {
          if (rng() % 2) r.predicted.push_back(m(n));
        }
        if (r.predicted.empty()) r.predicted.push_back(m("A"));
      }
      records.push_back(r);
    }
    const auto base = rank(records, s);
    std::shuffle(records.begin(), records.end(), rng);
    EXPECT_EQ(rank(records, s), base);
    // No duplicates, predicted segment non-increasing, appended after predicted.
    std::set<MethodSignature> seen;
    bool appended = false;
    for (std::size_t i = 0; i < base.ranked.size(); ++i) {
      EXPECT_TRUE(seen.insert(base.ranked[i].signature).second);
      if (base.ranked[i].provenance == Provenance::appended) appended = true;
      else EXPECT_FALSE(appended);
      if (i > 0 && !appended) EXPECT_LE(base.ranked[i].score, base.ranked[i - 1].score);
    }
  }
}

TEST(Confidence, AgreeingRunNeverLowersIt) {
  const auto s = worked_example_snapshot();
  auto records = worked_example_records();
  const auto before = rank(records, s);
  records.push_back(record(5, {"B"}));
  EXPECT_GE(rank(records, s).confidence, before.confidence);
}

TEST(Boost, ArithmeticCases) {
  const auto records = worked_example_records();
  const auto base = score_methods(records);
  const auto b = boost(records, base, {{1.0, 1.0, 1.0, 1.0, 0.0}, "test_score"});
  EXPECT_EQ(b.at(m("B")), 1.0);
  const auto d = boost(records, base, {{0.0, 0.0, 0.0, 0.0, 0.5}, "apr_score"});
  EXPECT_DOUBLE_EQ(d.at(m("D")), 0.3);
  EXPECT_EQ(boost(records, base, {{0, 0, 0, 0, 0}, "other"}), base);
}

TEST(Boost, RejectsBadVectors) {
  const auto records = worked_example_records();
  const auto base = score_methods(records);
  EXPECT_THROW(boost(records, base, {{1.0, 1.0}, "other"}), ValidationError);
  EXPECT_THROW(boost(records, base, {{0, 0, 0, 0, -1.0}, "other"}), ValidationError);
  EXPECT_THROW(boost(records, base, {{0, 0, 0, 0, NAN}, "other"}), ValidationError);
}

TEST(Boost, RankWithBoostAndRerankAgree) {
  const auto s = worked_example_snapshot();
  const auto records = worked_example_records();
  const BoostVector v{{0.0, 0.0, 0.0, 0.0, 3.0}, "apr_score"};
  const auto boosted = rank(records, s, v);
  EXPECT_TRUE(boosted.boost_applied);
  EXPECT_EQ(boosted.boost_source, "apr_score");
  EXPECT_EQ(names(boosted), (std::vector<std::string>{"D", "B", "A", "C", "E"}));
  EXPECT_DOUBLE_EQ(boosted.confidence, 0.8);
  EXPECT_EQ(rerank_with_boost(rank(records, s), records, v), boosted);
}

TEST(Boost, BoostsLookedUpByRunId) {
  const auto records = worked_example_records();
  const auto v = boosts_for(records, {{"run-1", 0.1}, {"run-2", 0.2}, {"run-3", 0.3}, {"run-4", 0.4}, {"run-5", 0.5}},
                            "test_score");
  EXPECT_EQ(v.values, (std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5}));
  EXPECT_THROW(boosts_for(records, {{"run-1", 0.1}}, "x"), ValidationError);
}

}  // namespace
}  // namespace autofl
