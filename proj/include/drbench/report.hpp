#ifndef DRBENCH_REPORT_HPP
#define DRBENCH_REPORT_HPP

// Experiment results, cross-dataset averaging, clean-vs-perturbed drops and
// the plain-text / JSON tables built from them.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "drbench/error.hpp"
#include "drbench/metrics.hpp"
#include "drbench/retrieval.hpp"

namespace drbench {

inline constexpr std::string_view kCleanCondition = "clean";

// "5", "20", "12.5": the percentage with trailing zeros dropped.
inline std::string format_percent(double epsilon) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", epsilon * 100.0);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

inline std::string condition_label(std::optional<double> epsilon) {
  if (!epsilon) return std::string(kCleanCondition);
  return "perturbed-" + format_percent(*epsilon) + "%";
}

// Row label as it appears in the tables: "ANCE", "ANCE-perturbed-5%".
inline std::string row_label(std::string_view model, std::string_view condition) {
  std::string out(model);
  if (condition != kCleanCondition) {
    out += '-';
    out += condition;
  }
  return out;
}

struct ConditionResult {
  std::string condition;           // "clean" or "perturbed-<pct>%"
  std::optional<double> epsilon;   // empty for clean
  MetricReport report;
  std::vector<RankedList> run;     // not part of the JSON result; written as a TREC run
};

struct DatasetResult {
  std::string name;
  std::vector<ConditionResult> conditions;
  std::optional<std::string> error;  // set when the dataset was aborted

  const ConditionResult* find(std::string_view condition) const {
    for (const auto& c : conditions) {
      if (c.condition == condition) return &c;
    }
    return nullptr;
  }
};

struct ExperimentResult {
  std::string model;
  std::vector<DatasetResult> datasets;
  nlohmann::json provenance = nlohmann::json::object();
};

// Unweighted mean across datasets, key by key. Throws InvalidArgument when the
// inputs do not share one metric set.
inline MetricValues aggregate_across_datasets(std::span<const MetricValues> per_dataset) {
  if (per_dataset.empty()) throw InvalidArgument("nothing to aggregate");
  MetricValues out;
  for (const auto& [key, value] : per_dataset.front()) {
    double sum = 0.0;
    for (const auto& values : per_dataset) {
      auto it = values.find(key);
      if (it == values.end()) throw InvalidArgument("metric set mismatch: missing " + key);
      sum += it->second;
    }
    out[key] = sum / static_cast<double>(per_dataset.size());
  }
  for (const auto& values : per_dataset) {
    if (values.size() != out.size()) throw InvalidArgument("metric set mismatch across datasets");
  }
  return out;
}

// clean - perturbed, so a positive value is a degradation.
inline MetricValues compute_drop(const MetricValues& clean, const MetricValues& perturbed) {
  if (clean.size() != perturbed.size()) throw InvalidArgument("metric set mismatch");
  MetricValues out;
  for (const auto& [key, value] : clean) {
    auto it = perturbed.find(key);
    if (it == perturbed.end()) throw InvalidArgument("metric set mismatch: missing " + key);
    out[key] = value - it->second;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tables

struct TableRow {
  std::string label;
  MetricValues values;
};

struct Table {
  std::string title;
  std::vector<std::string> columns;  // display columns; JSON keeps every value
  int decimals = 3;
  std::vector<TableRow> rows;
};

inline const std::vector<std::string>& standard_columns() {
  static const std::vector<std::string> cols = {"Acc@1",   "Prec@1", "Rec@1",
                                                "NDCG@10", "MRR@10", "MAP@100"};
  return cols;
}

// The standard six when all are available, otherwise every key in `params` order.
inline std::vector<std::string> display_columns(const MetricParams& params) {
  const auto keys = params.keys();
  const auto& std_cols = standard_columns();
  bool all = std::all_of(std_cols.begin(), std_cols.end(), [&](const std::string& c) {
    return std::find(keys.begin(), keys.end(), c) != keys.end();
  });
  return all ? std_cols : keys;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string render_text(const Table& table) {
  std::size_t label_width = std::string_view("Model").size();
  for (const auto& row : table.rows) label_width = std::max(label_width, row.label.size());
  std::vector<std::size_t> widths;
  for (const auto& c : table.columns) {
    widths.push_back(std::max<std::size_t>(c.size(), static_cast<std::size_t>(table.decimals) + 2));
  }

  std::ostringstream out;
  out << table.title << '\n';
  auto pad_right = [&](std::string_view s, std::size_t w) {
    out << s << std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  auto pad_left = [&](std::string_view s, std::size_t w) {
    out << std::string(w > s.size() ? w - s.size() : 0, ' ') << s;
  };
  pad_right("Model", label_width);
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << "  ";
    pad_left(table.columns[i], widths[i]);
  }
  out << '\n';
  std::size_t total = label_width;
  for (auto w : widths) total += 2 + w;
  out << std::string(total, '-') << '\n';
  for (const auto& row : table.rows) {
    pad_right(row.label, label_width);
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      out << "  ";
      auto it = row.values.find(table.columns[i]);
      pad_left(it == row.values.end() ? "-" : format_fixed(it->second, table.decimals), widths[i]);
    }
    out << '\n';
  }
  return out.str();
}

inline nlohmann::json table_to_json(const Table& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) rows.push_back({{"label", row.label}, {"values", row.values}});
  return {{"title", table.title}, {"columns", table.columns}, {"rows", rows}};
}

inline Table table_from_json(const nlohmann::json& j) {
  Table t;
  t.title = j.at("title").get<std::string>();
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& row : j.at("rows")) {
    t.rows.push_back({row.at("label").get<std::string>(), row.at("values").get<MetricValues>()});
  }
  return t;
}

struct ReportTables {
  std::vector<std::pair<std::string, Table>> per_dataset;  // dataset name -> table
  Table average;
  Table drop;
};

namespace detail {

// Conditions in first-seen order across models, clean first.
inline std::vector<std::string> ordered_conditions(const ExperimentResult& r) {
  std::vector<std::string> out{std::string(kCleanCondition)};
  std::vector<std::pair<double, std::string>> perturbed;
  for (const auto& ds : r.datasets) {
    for (const auto& c : ds.conditions) {
      if (c.epsilon && std::none_of(perturbed.begin(), perturbed.end(),
                                    [&](const auto& p) { return p.second == c.condition; })) {
        perturbed.emplace_back(*c.epsilon, c.condition);
      }
    }
  }
  std::sort(perturbed.begin(), perturbed.end());
  for (auto& p : perturbed) out.push_back(p.second);
  return out;
}

inline std::optional<MetricParams> first_params(std::span<const ExperimentResult> results) {
  for (const auto& r : results) {
    for (const auto& ds : r.datasets) {
      if (!ds.conditions.empty()) return ds.conditions.front().report.params;
    }
  }
  return std::nullopt;
}

// Mean of `condition` over the model's datasets that completed it.
inline std::optional<MetricValues> dataset_average(const ExperimentResult& r, std::string_view condition) {
  std::vector<MetricValues> values;
  for (const auto& ds : r.datasets) {
    if (ds.error) continue;
    if (const auto* c = ds.find(condition)) values.push_back(c->report.averaged);
  }
  if (values.empty()) return std::nullopt;
  return aggregate_across_datasets(values);
}

}  // namespace detail

// Builds one table per dataset, an across-dataset average table and a drop
// table (clean average minus perturbed average) for every model in `results`.
inline ReportTables build_tables(std::span<const ExperimentResult> results) {
  ReportTables out;
  const auto params = detail::first_params(results);
  const auto columns = params ? display_columns(*params) : standard_columns();

  std::vector<std::string> dataset_names;
  for (const auto& r : results) {
    for (const auto& ds : r.datasets) {
      if (std::find(dataset_names.begin(), dataset_names.end(), ds.name) == dataset_names.end()) {
        dataset_names.push_back(ds.name);
      }
    }
  }

  for (const auto& name : dataset_names) {
    Table t{"Summary of results for " + name, columns, 3, {}};
    for (const auto& r : results) {
      for (const auto& ds : r.datasets) {
        if (ds.name != name || ds.error) continue;
        for (const auto& cond : detail::ordered_conditions(r)) {
          if (const auto* c = ds.find(cond)) t.rows.push_back({row_label(r.model, cond), c->report.averaged});
        }
      }
    }
    out.per_dataset.emplace_back(name, std::move(t));
  }

  std::string names;
  for (const auto& n : dataset_names) names += (names.empty() ? "" : ", ") + n;
  out.average = Table{"Average performance (" + names + ")", columns, 2, {}};
  out.drop = Table{"Average performance drop (" + names + ")", columns, 3, {}};
  for (const auto& r : results) {
    const auto clean = detail::dataset_average(r, kCleanCondition);
    for (const auto& cond : detail::ordered_conditions(r)) {
      const auto avg = detail::dataset_average(r, cond);
      if (!avg) continue;
      out.average.rows.push_back({row_label(r.model, cond), *avg});
    }
    if (!clean) continue;
    for (const auto& cond : detail::ordered_conditions(r)) {
      if (cond == kCleanCondition) continue;
      if (const auto avg = detail::dataset_average(r, cond)) {
        out.drop.rows.push_back({row_label(r.model, cond), compute_drop(*clean, *avg)});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result serialization

inline nlohmann::json result_to_json(const ExperimentResult& r) {
  nlohmann::json datasets = nlohmann::json::array();
  for (const auto& ds : r.datasets) {
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : ds.conditions) {
      conds.push_back({{"condition", c.condition},
                       {"epsilon", c.epsilon ? nlohmann::json(*c.epsilon) : nlohmann::json(nullptr)},
                       {"report", report_to_json(c.report)}});
    }
    nlohmann::json j{{"name", ds.name}, {"conditions", conds}};
    j["error"] = ds.error ? nlohmann::json(*ds.error) : nlohmann::json(nullptr);
    datasets.push_back(std::move(j));
  }
  return {{"model", r.model}, {"datasets", datasets}, {"provenance", r.provenance}};
}

inline ExperimentResult result_from_json(const nlohmann::json& j) {
  ExperimentResult r;
  r.model = j.at("model").get<std::string>();
  r.provenance = j.value("provenance", nlohmann::json::object());
  for (const auto& d : j.at("datasets")) {
    DatasetResult ds;
    ds.name = d.at("name").get<std::string>();
    if (d.contains("error") && !d.at("error").is_null()) ds.error = d.at("error").get<std::string>();
    for (const auto& c : d.at("conditions")) {
      ConditionResult cr;
      cr.condition = c.at("condition").get<std::string>();
      if (!c.at("epsilon").is_null()) cr.epsilon = c.at("epsilon").get<double>();
      cr.report = report_from_json(c.at("report"));
      ds.conditions.push_back(std::move(cr));
    }
    r.datasets.push_back(std::move(ds));
  }
  return r;
}

inline ExperimentResult read_result(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return result_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, std::string("malformed result file: ") + e.what());
  }
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

}  // namespace detail

// Writes tables/<dataset>.{json,txt} per dataset plus tables/average.* and
// tables/drop.*. Returns the paths written.
inline std::vector<std::filesystem::path> emit_report(std::span<const ExperimentResult> results,
                                                      const std::filesystem::path& out_dir) {
  const auto tables = build_tables(results);
  const auto dir = out_dir / "tables";
  detail::ensure_dir(dir / "datasets");
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::filesystem::path& stem, const Table& t) {
    auto json_path = stem;
    json_path += ".json";
    auto txt_path = stem;
    txt_path += ".txt";
    detail::write_text_file(json_path, table_to_json(t).dump(2) + "\n");
    detail::write_text_file(txt_path, render_text(t));
    written.push_back(json_path);
    written.push_back(txt_path);
  };
  for (const auto& [name, t] : tables.per_dataset) emit(dir / "datasets" / name, t);
  emit(dir / "average", tables.average);
  emit(dir / "drop", tables.drop);
  return written;
}

}  // namespace drbench

#endif  // DRBENCH_REPORT_HPP
