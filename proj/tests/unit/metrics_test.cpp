#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "drbench/metrics.hpp"
#include "support/metric_oracle.hpp"

namespace drbench {
namespace {

RankedList ranked(std::vector<std::string> ids, std::string qid = "q") {
  RankedList l{std::move(qid), {}};
  for (std::size_t i = 0; i < ids.size(); ++i) l.entries.push_back({ids[i], 1.0 / (i + 1), i + 1});
  return l;
}

TEST(Precision, Examples) {
  Qrels::Grades g = {{"r1", 1}, {"r2", 1}};
  EXPECT_DOUBLE_EQ(precision_at_k(ranked({"r1", "x"}), g, 1), 1.0);
  EXPECT_DOUBLE_EQ(precision_at_k(ranked({"r1", "x", "r2", "y", "z"}), g, 5), 0.4);
  EXPECT_DOUBLE_EQ(precision_at_k(ranked({"x", "y"}), g, 2), 0.0);
  // Short lists still divide by k.
  EXPECT_DOUBLE_EQ(precision_at_k(ranked({"r1"}), g, 10), 0.1);
}

TEST(Recall, Examples) {
  Qrels::Grades g = {{"r1", 1}, {"r2", 1}, {"n", 0}};
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({"r1", "r2"}), g, 1), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(ranked({"x", "r2", "r1"}), g, 3), 1.0);
  EXPECT_THROW(recall_at_k(ranked({"x"}), Qrels::Grades{{"n", 0}}, 1), InvalidArgument);
}

TEST(Accuracy, HitAtBoundary) {
  Qrels::Grades g = {{"r", 1}};
  EXPECT_DOUBLE_EQ(accuracy_at_k(ranked({"a", "b", "r"}), g, 3), 1.0);
  EXPECT_DOUBLE_EQ(accuracy_at_k(ranked({"a", "b", "r"}), g, 2), 0.0);
}

TEST(Ndcg, SingleRelevantAtRankOneAndTwo) {
  Qrels::Grades g = {{"r", 1}};
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({"r", "x"}), g, 10), 1.0);
  EXPECT_NEAR(dcg_at_k(ranked({"x", "r"}), g, 10), 0.6309, 1e-4);
  EXPECT_DOUBLE_EQ(idcg_at_k(g, 10), 1.0);
  EXPECT_NEAR(ndcg_at_k(ranked({"x", "r"}), g, 10), 0.6309, 1e-4);
}

TEST(Ndcg, GradedSwap) {
  Qrels::Grades g = {{"d1", 2}, {"d2", 1}};
  auto list = ranked({"d2", "d1"});
  EXPECT_NEAR(dcg_at_k(list, g, 2), 2.8928, 1e-4);
  EXPECT_NEAR(idcg_at_k(g, 2), 3.6309, 1e-4);
  EXPECT_NEAR(ndcg_at_k(list, g, 2), 0.7967, 1e-4);
}

TEST(Ndcg, IdealCountsJudgedDocsBeyondTheReturnedList) {
  Qrels::Grades g = {{"a", 1}, {"b", 1}, {"c", 0}};
  // Only one of two relevant docs returned; the ideal still has both.
  EXPECT_NEAR(ndcg_at_k(ranked({"a"}), g, 10), 1.0 / (1.0 + 1.0 / std::log2(3.0)), 1e-12);
  EXPECT_THROW(ndcg_at_k(ranked({"a"}), Qrels::Grades{{"c", 0}}, 10), InvalidArgument);
  EXPECT_THROW(idcg_at_k(g, 0), InvalidArgument);
}

TEST(Mrr, Examples) {
  Qrels::Grades g = {{"r", 1}};
  EXPECT_DOUBLE_EQ(reciprocal_rank_at_k(ranked({"a", "b", "c", "r"}), g, 10), 0.25);
  EXPECT_DOUBLE_EQ(reciprocal_rank_at_k(ranked({"a", "b", "c", "r"}), g, 3), 0.0);

  Qrels qrels({{"q1", "r", 1}, {"q2", "r", 1}});
  MetricParams p;
  p.k_list = {10};
  p.metrics = {Metric::kMrr};
  std::vector<RankedList> run = {ranked({"a", "r"}, "q1"), ranked({"a", "b", "c", "r"}, "q2")};
  EXPECT_DOUBLE_EQ(evaluate_run(run, qrels, p).averaged.at("MRR@10"), 0.375);
}

TEST(AveragePrecision, Examples) {
  Qrels::Grades g = {{"r1", 1}, {"r2", 1}};
  EXPECT_NEAR(average_precision_at_k(ranked({"r1", "x", "r2"}), g, 10), 0.8333, 1e-4);
  EXPECT_DOUBLE_EQ(average_precision_at_k(ranked({"r2", "r1", "x"}), g, 10), 1.0);
  EXPECT_DOUBLE_EQ(average_precision_at_k(ranked({"x", "y"}), g, 10), 0.0);
  // min(R, k) normalizer: one of two relevant docs at rank 1 is perfect at k = 1.
  EXPECT_DOUBLE_EQ(average_precision_at_k(ranked({"r1", "r2"}), g, 1), 1.0);
  // Graded relevance counts as binary.
  EXPECT_DOUBLE_EQ(average_precision_at_k(ranked({"a", "b"}), Qrels::Grades{{"b", 2}}, 10), 0.5);
}

TEST(Metric, LabelsAndKeys) {
  EXPECT_EQ(metric_key(Metric::kNdcg, 10), "NDCG@10");
  EXPECT_EQ(parse_metric("MAP"), Metric::kMap);
  EXPECT_FALSE(parse_metric("ndcg").has_value());
  MetricParams p;
  p.k_list = {1, 5};
  p.metrics = {Metric::kAccuracy, Metric::kMrr};
  EXPECT_EQ(p.keys(), (std::vector<std::string>{"Acc@1", "Acc@5", "MRR@1", "MRR@5"}));
  EXPECT_EQ(p.retrieval_depth(), 100u);
  p.k_list = {1, 1000};
  EXPECT_EQ(p.retrieval_depth(), 1000u);
}

TEST(MetricParams, Validation) {
  MetricParams p;
  p.k_list = {};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.k_list = {0};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.k_list = {10, 1};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.k_list = {1, 1};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p.k_list = {1};
  p.metrics = {};
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(EvaluateRun, PerfectTopOne) {
  Qrels qrels({{"q", "r1", 1}, {"q", "r2", 1}, {"q", "r3", 1}});
  MetricParams p;
  p.k_list = {1};
  auto report = evaluate_run(std::vector<RankedList>{ranked({"r1", "x"})}, qrels, p);
  const auto& v = report.averaged;
  EXPECT_DOUBLE_EQ(v.at("Acc@1"), 1.0);
  EXPECT_DOUBLE_EQ(v.at("Prec@1"), 1.0);
  EXPECT_DOUBLE_EQ(v.at("Rec@1"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(v.at("NDCG@1"), 1.0);
  EXPECT_DOUBLE_EQ(v.at("MRR@1"), 1.0);
  EXPECT_DOUBLE_EQ(v.at("MAP@1"), 1.0);
  EXPECT_EQ(report.q_evaluated, 1u);
}

TEST(EvaluateRun, ExcludesQueriesWithoutPositives) {
  Qrels qrels({{"q1", "r", 1}, {"q2", "r", 0}});
  MetricParams p;
  p.k_list = {1};
  std::vector<RankedList> run = {ranked({"r"}, "q1"), ranked({"x"}, "q2"), ranked({"x"}, "q3")};
  auto report = evaluate_run(run, qrels, p);
  EXPECT_EQ(report.q_evaluated, 1u);
  EXPECT_EQ(report.q_excluded, 2u);
  EXPECT_EQ(report.per_query.count("q2"), 0u);
  EXPECT_DOUBLE_EQ(report.averaged.at("NDCG@1"), 1.0);
}

TEST(EvaluateRun, Errors) {
  Qrels qrels({{"q1", "r", 1}});
  MetricParams p;
  EXPECT_THROW(evaluate_run(std::vector<RankedList>{ranked({"r"}, "q1"), ranked({"r"}, "q1")}, qrels, p),
               InvalidArgument);
  EXPECT_THROW(evaluate_run(std::vector<RankedList>{ranked({"r"}, "q9")}, qrels, p), InvalidArgument);
  EXPECT_THROW(evaluate_run({}, qrels, p), InvalidArgument);
}

TEST(EvaluateRun, MatchesOracleOnRandomFiveQueryEightDocInstance) {
  SplitMix64 rng(31);
  std::vector<Judgment> js;
  std::vector<RankedList> run;
  std::map<std::string, testing::OracleQuery> oracle;
  for (int q = 0; q < 5; ++q) {
    const std::string qid = "q" + std::to_string(q);
    std::vector<std::string> docs;
    for (int d = 0; d < 8; ++d) {
      const std::string did = "d" + std::to_string(d);
      docs.push_back(did);
      const int g = static_cast<int>(rng.next() % 3);
      if (d == q) {
        js.push_back({qid, did, 1 + g % 2});  // at least one positive per query
        oracle[qid].grades[did] = 1 + g % 2;
      } else if (rng.next() % 2) {
        js.push_back({qid, did, g});
        oracle[qid].grades[did] = g;
      }
    }
    for (std::size_t i = docs.size(); i > 1; --i) std::swap(docs[i - 1], docs[rng.next() % i]);
    oracle[qid].ranking = docs;
    run.push_back(ranked(docs, qid));
  }
  MetricParams p;
  p.k_list = {1, 3, 5, 10};
  auto report = evaluate_run(run, Qrels(js), p);
  for (const auto& [qid, oq] : oracle) {
    for (Metric m : kAllMetrics) {
      for (std::size_t k : p.k_list) {
        EXPECT_NEAR(report.per_query.at(qid).at(metric_key(m, k)),
                    testing::oracle_metric(std::string(metric_label(m)), oq, k), 1e-9)
            << qid << " " << metric_key(m, k);
      }
    }
  }
}

TEST(MetricJson, RoundTrip) {
  Qrels qrels({{"q1", "r", 1}});
  MetricParams p;
  p.k_list = {1, 10};
  p.metrics = {Metric::kNdcg, Metric::kMap};
  auto report = evaluate_run(std::vector<RankedList>{ranked({"x", "r"}, "q1")}, qrels, p);
  report.q_excluded = 4;
  auto back = report_from_json(report_to_json(report));
  EXPECT_EQ(back.per_query, report.per_query);
  EXPECT_EQ(back.averaged, report.averaged);
  EXPECT_EQ(back.q_evaluated, 1u);
  EXPECT_EQ(back.q_excluded, 4u);
  EXPECT_EQ(back.params.keys(), p.keys());
  EXPECT_THROW(params_from_json(nlohmann::json{{"k", {1}}, {"metrics", {"BLEU"}}}), InvalidArgument);
}

}  // namespace
}  // namespace drbench
