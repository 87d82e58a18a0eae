#ifndef DRBENCH_METRICS_HPP
#define DRBENCH_METRICS_HPP

// Ranked-retrieval metrics at a cutoff k. rel_i is the judged grade of the
// document at rank i (0 when unjudged); R is the number of judged documents
// with grade > 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "drbench/corpus_io.hpp"
#include "drbench/error.hpp"
#include "drbench/retrieval.hpp"

namespace drbench {

enum class Metric { kAccuracy, kPrecision, kRecall, kNdcg, kMrr, kMap };

inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::kAccuracy, Metric::kPrecision,
                                                      Metric::kRecall,   Metric::kNdcg,
                                                      Metric::kMrr,      Metric::kMap};

inline constexpr std::string_view metric_label(Metric m) {
  switch (m) {
    case Metric::kAccuracy: return "Acc";
    case Metric::kPrecision: return "Prec";
    case Metric::kRecall: return "Rec";
    case Metric::kNdcg: return "NDCG";
    case Metric::kMrr: return "MRR";
    case Metric::kMap: return "MAP";
  }
  return "?";
}

inline std::optional<Metric> parse_metric(std::string_view label) {
  for (Metric m : kAllMetrics) {
    if (metric_label(m) == label) return m;
  }
  return std::nullopt;
}

inline std::string metric_key(Metric m, std::size_t k) {
  return std::string(metric_label(m)) + "@" + std::to_string(k);
}

// metric@k -> value
using MetricValues = std::map<std::string, double>;

inline constexpr std::size_t kMinRetrievalDepth = 100;

struct MetricParams {
  std::vector<std::size_t> k_list = {1, 10, 100};
  std::vector<Metric> metrics = {kAllMetrics.begin(), kAllMetrics.end()};

  void validate() const {
    if (k_list.empty()) throw InvalidArgument("k list is empty");
    if (metrics.empty()) throw InvalidArgument("metric list is empty");
    for (std::size_t i = 0; i < k_list.size(); ++i) {
      if (k_list[i] == 0) throw InvalidArgument("k must be at least 1");
      if (i > 0 && k_list[i] <= k_list[i - 1]) {
        throw InvalidArgument("k list must be strictly ascending");
      }
    }
  }

  // Documents to retrieve per query so that every cutoff, and MAP@100, is computable.
  std::size_t retrieval_depth() const { return std::max(k_list.back(), kMinRetrievalDepth); }

  // Keys in display order: metric-major, then ascending k.
  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (Metric m : metrics) {
      for (std::size_t k : k_list) out.push_back(metric_key(m, k));
    }
    return out;
  }
};

namespace detail {

inline int grade_of(const Qrels::Grades& grades, const std::string& doc_id) {
  auto it = grades.find(doc_id);
  return it == grades.end() ? 0 : it->second;
}

inline std::size_t positive_count(const Qrels::Grades& grades) {
  return static_cast<std::size_t>(
      std::count_if(grades.begin(), grades.end(), [](const auto& kv) { return kv.second > 0; }));
}

inline std::size_t cutoff(const RankedList& list, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  return std::min(k, list.entries.size());
}

inline double gain(int rel) { return std::ldexp(1.0, rel) - 1.0; }
inline double discount(std::size_t rank) { return std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace detail

inline std::size_t relevant_in_top_k(const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  const std::size_t n = detail::cutoff(list, k);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += detail::grade_of(grades, list.entries[i].doc_id) > 0;
  return hits;
}

inline double precision_at_k(const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  return static_cast<double>(relevant_in_top_k(list, grades, k)) / static_cast<double>(k);
}

inline double recall_at_k(const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  const std::size_t r = detail::positive_count(grades);
  if (r == 0) throw InvalidArgument("recall is undefined for a query with no relevant documents");
  return static_cast<double>(relevant_in_top_k(list, grades, k)) / static_cast<double>(r);
}

// Hit rate: whether anything relevant made it into the top k.
inline double accuracy_at_k(const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  return relevant_in_top_k(list, grades, k) > 0 ? 1.0 : 0.0;
}

inline double dcg_at_k(const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  const std::size_t n = detail::cutoff(list, k);
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dcg += detail::gain(detail::grade_of(grades, list.entries[i].doc_id)) / detail::discount(i + 1);
  }
  return dcg;
}

// DCG of the judged documents sorted by grade, truncated at k.
inline double idcg_at_k(const Qrels::Grades& grades, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  std::vector<int> ideal;
  ideal.reserve(grades.size());
  for (const auto& [doc, rel] : grades) ideal.push_back(rel);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += detail::gain(ideal[i]) / detail::discount(i + 1);
  }
  return idcg;
}

inline double ndcg_at_k(const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  const double idcg = idcg_at_k(grades, k);
  if (!(idcg > 0.0)) throw InvalidArgument("NDCG is undefined for a query with no relevant documents");
  return dcg_at_k(list, grades, k) / idcg;
}

inline double reciprocal_rank_at_k(const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  const std::size_t n = detail::cutoff(list, k);
  for (std::size_t i = 0; i < n; ++i) {
    if (detail::grade_of(grades, list.entries[i].doc_id) > 0) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

// (1 / min(R, k)) * sum over i <= k of Precision@i * [rel_i > 0].
inline double average_precision_at_k(const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  const std::size_t r = detail::positive_count(grades);
  if (r == 0) throw InvalidArgument("AP is undefined for a query with no relevant documents");
  const std::size_t n = detail::cutoff(list, k);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (detail::grade_of(grades, list.entries[i].doc_id) > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(std::min(r, k));
}

inline double metric_at_k(Metric m, const RankedList& list, const Qrels::Grades& grades, std::size_t k) {
  switch (m) {
    case Metric::kAccuracy: return accuracy_at_k(list, grades, k);
    case Metric::kPrecision: return precision_at_k(list, grades, k);
    case Metric::kRecall: return recall_at_k(list, grades, k);
    case Metric::kNdcg: return ndcg_at_k(list, grades, k);
    case Metric::kMrr: return reciprocal_rank_at_k(list, grades, k);
    case Metric::kMap: return average_precision_at_k(list, grades, k);
  }
  throw InvalidArgument("unknown metric");
}

struct MetricReport {
  std::map<std::string, MetricValues> per_query;  // query_id -> metric@k -> value
  MetricValues averaged;
  std::size_t q_evaluated = 0;
  std::size_t q_excluded = 0;  // ranked, but no judgment with grade > 0
  MetricParams params;
};

// Queries without any positive judgment are excluded from every average and
// only counted. Throws InvalidArgument if nothing is left to evaluate.
inline MetricReport evaluate_run(std::span<const RankedList> run, const Qrels& qrels,
                                 const MetricParams& params) {
  params.validate();
  MetricReport report;
  report.params = params;
  const auto keys = params.keys();

  std::set<std::string> seen;
  for (const auto& list : run) {
    if (!seen.insert(list.query_id).second) {
      throw InvalidArgument("query \"" + list.query_id + "\" appears twice in the run");
    }
    const Qrels::Grades* grades = qrels.grades(list.query_id);
    if (grades == nullptr || detail::positive_count(*grades) == 0) {
      ++report.q_excluded;
      continue;
    }
    MetricValues& values = report.per_query[list.query_id];
    for (Metric m : params.metrics) {
      for (std::size_t k : params.k_list) values[metric_key(m, k)] = metric_at_k(m, list, *grades, k);
    }
  }
  report.q_evaluated = report.per_query.size();
  if (report.q_evaluated == 0) throw InvalidArgument("no evaluable queries in run");

  for (const auto& key : keys) {
    double sum = 0.0;
    for (const auto& [qid, values] : report.per_query) sum += values.at(key);
    report.averaged[key] = sum / static_cast<double>(report.q_evaluated);
  }
  return report;
}

inline nlohmann::json params_to_json(const MetricParams& p) {
  nlohmann::json metrics = nlohmann::json::array();
  for (Metric m : p.metrics) metrics.push_back(std::string(metric_label(m)));
  return {{"k", p.k_list}, {"metrics", metrics}};
}

inline MetricParams params_from_json(const nlohmann::json& j) {
  MetricParams p;
  p.k_list = j.at("k").get<std::vector<std::size_t>>();
  p.metrics.clear();
  for (const auto& label : j.at("metrics")) {
    auto m = parse_metric(label.get<std::string>());
    if (!m) throw InvalidArgument("unknown metric \"" + label.get<std::string>() + "\"");
    p.metrics.push_back(*m);
  }
  p.validate();
  return p;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  return {{"per_query", r.per_query},
          {"averaged", r.averaged},
          {"q_evaluated", r.q_evaluated},
          {"q_excluded", r.q_excluded},
          {"params", params_to_json(r.params)}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.per_query = j.at("per_query").get<std::map<std::string, MetricValues>>();
  r.averaged = j.at("averaged").get<MetricValues>();
  r.q_evaluated = j.at("q_evaluated").get<std::size_t>();
  r.q_excluded = j.value("q_excluded", std::size_t{0});
  r.params = params_from_json(j.at("params"));
  return r;
}

}  // namespace drbench

#endif  // DRBENCH_METRICS_HPP
