#ifndef DRBENCH_RUNNER_HPP
#define DRBENCH_RUNNER_HPP

// End-to-end experiments: embed the corpus once, evaluate clean queries, then
// re-embed and re-evaluate perturbed queries for every configured rate.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drbench/corpus_io.hpp"
#include "drbench/embed.hpp"
#include "drbench/error.hpp"
#include "drbench/metrics.hpp"
#include "drbench/perturb.hpp"
#include "drbench/report.hpp"
#include "drbench/retrieval.hpp"
#include "drbench/rng.hpp"
#include "drbench/service.hpp"
#include "drbench/store.hpp"
#include "drbench/tokenizer.hpp"

namespace drbench {

inline constexpr std::size_t kDefaultMaxLen = 64;

struct DatasetEntry {
  std::string name;
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::filesystem::path qrels;
  std::filesystem::path vocab;                       // required by the reference provider
  std::optional<std::filesystem::path> corpus_store;  // precomputed document embeddings
};

struct ProviderConfig {
  enum class Kind { kReference, kFile, kService };

  Kind kind = Kind::kReference;
  // reference
  std::size_t dim = kDefaultReferenceDim;
  std::uint64_t seed = 0;
  // file: directory holding <dataset>.corpus.dre and <dataset>.queries.dre
  std::filesystem::path path;
  // service
  std::string endpoint;
  std::string model;
  std::size_t vocab_size = 0;
  std::vector<TokenId> special_ids;
  std::size_t batch_size = kDefaultServiceBatch;
};

inline std::string_view kind_name(ProviderConfig::Kind k) {
  switch (k) {
    case ProviderConfig::Kind::kReference: return "reference";
    case ProviderConfig::Kind::kFile: return "file";
    case ProviderConfig::Kind::kService: return "service";
  }
  return "?";
}

inline ProviderConfig::Kind parse_kind(std::string_view s) {
  if (s == "reference") return ProviderConfig::Kind::kReference;
  if (s == "file") return ProviderConfig::Kind::kFile;
  if (s == "service") return ProviderConfig::Kind::kService;
  throw ValidationError("unknown provider kind \"" + std::string(s) + "\"");
}

struct ExperimentConfig {
  std::vector<DatasetEntry> datasets;
  ProviderConfig provider;
  std::string model_label;  // defaults to the provider name
  MetricParams metrics;
  std::vector<double> perturb_rates = {0.05, 0.20};
  double default_rate = kDefaultPerturbRate;
  std::uint64_t master_seed = 0;
  std::size_t max_len = kDefaultMaxLen;
  bool include_special = true;
  std::filesystem::path output_dir = "out";
  std::size_t threads = 1;

  std::string model() const {
    if (!model_label.empty()) return model_label;
    if (provider.kind == ProviderConfig::Kind::kService) return provider.model;
    return std::string(kind_name(provider.kind));
  }

  void validate() const {
    if (datasets.empty()) throw ValidationError("config lists no datasets");
    std::set<std::string> names;
    for (const auto& d : datasets) {
      if (d.name.empty()) throw ValidationError("dataset with empty name");
      if (d.name.find_first_of("/\\") != std::string::npos || d.name == "." || d.name == "..") {
        throw ValidationError("dataset name \"" + d.name + "\" is not a valid file name");
      }
      if (!names.insert(d.name).second) throw ValidationError("duplicate dataset name \"" + d.name + "\"");
      if (d.corpus == d.queries || d.corpus == d.qrels || d.queries == d.qrels) {
        throw ValidationError("dataset \"" + d.name + "\" reuses one path for several files");
      }
      if (provider.kind == ProviderConfig::Kind::kReference && d.vocab.empty()) {
        throw ValidationError("dataset \"" + d.name + "\" needs a vocab for the reference provider");
      }
    }
    for (double r : perturb_rates) {
      if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("perturbation rates must lie in [0, 1]");
    }
    if (!(default_rate >= 0.0 && default_rate <= 1.0)) {
      throw ValidationError("default perturbation rate must lie in [0, 1]");
    }
    if (max_len < 2) throw ValidationError("max_len must be at least 2");
    try {
      metrics.validate();
    } catch (const InvalidArgument& e) {
      throw ValidationError(e.what());
    }
    switch (provider.kind) {
      case ProviderConfig::Kind::kReference:
        if (provider.dim == 0) throw ValidationError("reference provider needs dim > 0");
        break;
      case ProviderConfig::Kind::kFile:
        if (provider.path.empty()) throw ValidationError("file provider needs a path");
        break;
      case ProviderConfig::Kind::kService:
        if (provider.endpoint.empty() || provider.model.empty()) {
          throw ValidationError("service provider needs endpoint and model");
        }
        if (provider.vocab_size == 0) throw ValidationError("service provider needs vocab_size");
        if (provider.batch_size == 0) throw ValidationError("service provider needs batch_size > 0");
        break;
    }
  }
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
}

// Rejects keys that belong to a different provider kind.
inline void check_provider_keys(const nlohmann::json& j, ProviderConfig::Kind kind) {
  static const std::vector<std::pair<const char*, ProviderConfig::Kind>> owned = {
      {"dim", ProviderConfig::Kind::kReference},      {"seed", ProviderConfig::Kind::kReference},
      {"path", ProviderConfig::Kind::kFile},          {"endpoint", ProviderConfig::Kind::kService},
      {"model", ProviderConfig::Kind::kService},      {"vocab_size", ProviderConfig::Kind::kService},
      {"special_ids", ProviderConfig::Kind::kService}, {"batch_size", ProviderConfig::Kind::kService},
  };
  for (const auto& [key, owner] : owned) {
    if (j.contains(key) && owner != kind) {
      throw ValidationError(std::string("provider key \"") + key + "\" does not apply to kind \"" +
                            std::string(kind_name(kind)) + "\"");
    }
  }
}

}  // namespace detail

inline ProviderConfig provider_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  ProviderConfig p;
  p.kind = parse_kind(detail::get_or<std::string>(j, "kind", "reference"));
  detail::check_provider_keys(j, p.kind);
  p.dim = detail::get_or<std::size_t>(j, "dim", kDefaultReferenceDim);
  p.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("path")) p.path = detail::resolve(base, j.at("path").get<std::string>());
  p.endpoint = detail::get_or<std::string>(j, "endpoint", "");
  p.model = detail::get_or<std::string>(j, "model", "");
  p.vocab_size = detail::get_or<std::size_t>(j, "vocab_size", 0);
  p.special_ids = detail::get_or<std::vector<TokenId>>(j, "special_ids", {});
  p.batch_size = detail::get_or<std::size_t>(j, "batch_size", kDefaultServiceBatch);
  return p;
}

inline nlohmann::json provider_to_json(const ProviderConfig& p) {
  nlohmann::json j{{"kind", kind_name(p.kind)}};
  switch (p.kind) {
    case ProviderConfig::Kind::kReference:
      j["dim"] = p.dim;
      j["seed"] = p.seed;
      break;
    case ProviderConfig::Kind::kFile:
      j["path"] = p.path.string();
      break;
    case ProviderConfig::Kind::kService:
      j["endpoint"] = p.endpoint;
      j["model"] = p.model;
      j["vocab_size"] = p.vocab_size;
      j["special_ids"] = p.special_ids;
      j["batch_size"] = p.batch_size;
      break;
  }
  return j;
}

// Relative paths are resolved against `base` (normally the config file's directory).
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  ExperimentConfig c;
  try {
    for (const auto& d : j.at("datasets")) {
      DatasetEntry e;
      e.name = d.at("name").get<std::string>();
      e.corpus = detail::resolve(base, d.at("corpus").get<std::string>());
      e.queries = detail::resolve(base, d.at("queries").get<std::string>());
      e.qrels = detail::resolve(base, d.at("qrels").get<std::string>());
      if (d.contains("vocab")) e.vocab = detail::resolve(base, d.at("vocab").get<std::string>());
      if (d.contains("corpus_store")) {
        e.corpus_store = detail::resolve(base, d.at("corpus_store").get<std::string>());
      }
      c.datasets.push_back(std::move(e));
    }
    if (j.contains("provider")) c.provider = provider_from_json(j.at("provider"), base);
    c.model_label = detail::get_or<std::string>(j, "model_label", "");
    c.metrics.k_list = detail::get_or<std::vector<std::size_t>>(j, "k", c.metrics.k_list);
    c.perturb_rates = detail::get_or<std::vector<double>>(j, "perturb_rates", c.perturb_rates);
    c.default_rate = detail::get_or<double>(j, "default_rate", c.default_rate);
    c.master_seed = detail::get_or<std::uint64_t>(j, "master_seed", c.master_seed);
    c.max_len = detail::get_or<std::size_t>(j, "max_len", c.max_len);
    c.include_special = detail::get_or<bool>(j, "include_special", c.include_special);
    if (j.contains("output_dir")) c.output_dir = detail::resolve(base, j.at("output_dir").get<std::string>());
    c.threads = detail::get_or<std::size_t>(j, "threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json datasets = nlohmann::json::array();
  for (const auto& d : c.datasets) {
    nlohmann::json e{{"name", d.name},
                     {"corpus", d.corpus.string()},
                     {"queries", d.queries.string()},
                     {"qrels", d.qrels.string()}};
    if (!d.vocab.empty()) e["vocab"] = d.vocab.string();
    if (d.corpus_store) e["corpus_store"] = d.corpus_store->string();
    datasets.push_back(std::move(e));
  }
  return {{"datasets", datasets},
          {"provider", provider_to_json(c.provider)},
          {"model_label", c.model_label},
          {"k", c.metrics.k_list},
          {"perturb_rates", c.perturb_rates},
          {"default_rate", c.default_rate},
          {"master_seed", c.master_seed},
          {"max_len", c.max_len},
          {"include_special", c.include_special},
          {"output_dir", c.output_dir.string()},
          {"threads", c.threads}};
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

// Stable fingerprint of everything that influences results.
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = config_to_json(c);
  j.erase("output_dir");
  j.erase("threads");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

struct LoadedDataset {
  Corpus corpus;
  QuerySet queries;
  Qrels qrels;
  ValidationReport validation;
};

inline LoadedDataset load_dataset(const DatasetEntry& entry) {
  LoadedDataset d;
  d.corpus = load_corpus(entry.corpus);
  d.queries = load_queries(entry.queries);
  try {
    d.qrels = load_qrels(entry.qrels);
  } catch (const InvalidArgument& e) {
    throw ParseError(entry.qrels.string(), 0, e.what());
  }
  d.validation = validate_dataset(d.corpus, d.queries, d.qrels);
  return d;
}

// Text used to embed a document.
inline std::string document_text(const Document& doc) {
  return doc.title.empty() ? doc.text : doc.title + " " + doc.text;
}

using ProviderFactory =
    std::function<std::unique_ptr<EmbeddingProvider>(const DatasetEntry&, const ExperimentConfig&)>;

// Builds the provider named by the config. The file provider has no live model
// and yields nullptr; run_experiment reads its stores instead.
inline std::unique_ptr<EmbeddingProvider> make_provider(const DatasetEntry& entry, const ExperimentConfig& c) {
  switch (c.provider.kind) {
    case ProviderConfig::Kind::kReference:
      return std::make_unique<ReferenceProvider>(load_vocab(entry.vocab), c.max_len, c.provider.dim,
                                                 c.provider.seed, c.threads);
    case ProviderConfig::Kind::kService:
      return std::make_unique<ServiceProvider>(
          ServiceEndpoint{c.provider.endpoint, c.provider.model, c.provider.batch_size},
          TokenSpace{c.provider.vocab_size, c.provider.special_ids});
    case ProviderConfig::Kind::kFile:
      return nullptr;
  }
  return nullptr;
}

inline std::filesystem::path file_provider_store(const ProviderConfig& p, const std::string& dataset,
                                                 std::string_view what) {
  return p.path / (dataset + "." + std::string(what) + ".dre");
}

inline EmbeddingStore embed_corpus(EmbeddingProvider& provider, const Corpus& corpus) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& d : corpus) texts.push_back(document_text(d));
  const auto seqs = provider.tokenize(texts);
  const auto vectors = provider.embed(seqs);
  EmbeddingStore store;
  store.normalized = true;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto v = vectors[i];
    normalize_in_place(v);
    if (i == 0) store.dim = v.size();
    store.add(corpus[i].id, std::span<const double>(v));
  }
  return store;
}

// Conditions evaluated: clean, then one perturbed condition per rate.
struct RunPlan {
  std::vector<double> rates;
};

namespace detail {

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline ConditionResult evaluate_condition(const FlatIndex& index, std::vector<QueryVector> queries,
                                          const Qrels& qrels, const ExperimentConfig& c,
                                          std::optional<double> epsilon, std::size_t skipped) {
  ConditionResult cr;
  cr.epsilon = epsilon;
  cr.condition = condition_label(epsilon);
  cr.run = batch_search(index, queries, c.metrics.retrieval_depth(), c.threads);
  cr.report = evaluate_run(cr.run, qrels, c.metrics);
  cr.report.q_excluded += skipped;
  return cr;
}

inline DatasetResult run_dataset(const DatasetEntry& entry, const LoadedDataset& data,
                                 const ExperimentConfig& c, const RunPlan& plan,
                                 const ProviderFactory& factory) {
  DatasetResult out;
  out.name = entry.name;

  // Only queries with a positive judgment are retrieved; the rest are counted as excluded.
  std::vector<const Query*> evaluable;
  for (const auto& q : data.queries) {
    if (data.qrels.positives(q.id) > 0) evaluable.push_back(&q);
  }
  const std::size_t skipped = data.queries.size() - evaluable.size();

  if (c.provider.kind == ProviderConfig::Kind::kFile) {
    const auto corpus_store = read_store(entry.corpus_store.value_or(
        file_provider_store(c.provider, entry.name, "corpus")));
    const auto query_store = read_store(file_provider_store(c.provider, entry.name, "queries"));
    const auto index = build_index(corpus_store);
    std::vector<QueryVector> qv;
    for (const Query* q : evaluable) {
      auto it = query_store.records.find(q->id);
      if (it == query_store.records.end()) {
        throw ProviderError("query store lacks an embedding for \"" + q->id + "\"");
      }
      qv.push_back({q->id, EmbeddingVector(it->second.begin(), it->second.end())});
    }
    out.conditions.push_back(evaluate_condition(index, std::move(qv), data.qrels, c, std::nullopt, skipped));
    return out;
  }

  auto provider = factory(entry, c);
  if (!provider) throw ProviderError("no provider available for \"" + entry.name + "\"");

  const EmbeddingStore store =
      entry.corpus_store ? read_store(*entry.corpus_store) : embed_corpus(*provider, data.corpus);
  const FlatIndex index = build_index(store);

  std::vector<std::string> texts;
  texts.reserve(evaluable.size());
  for (const Query* q : evaluable) texts.push_back(q->text);
  const auto clean_seqs = provider->tokenize(texts);

  auto to_query_vectors = [&](const std::vector<TokenSequence>& seqs) {
    const auto vectors = provider->embed(seqs);
    std::vector<QueryVector> qv(evaluable.size());
    for (std::size_t i = 0; i < evaluable.size(); ++i) qv[i] = {evaluable[i]->id, vectors[i]};
    return qv;
  };

  out.conditions.push_back(
      evaluate_condition(index, to_query_vectors(clean_seqs), data.qrels, c, std::nullopt, skipped));

  std::vector<std::pair<std::string, TokenSequence>> keyed;
  keyed.reserve(evaluable.size());
  for (std::size_t i = 0; i < evaluable.size(); ++i) keyed.emplace_back(evaluable[i]->id, clean_seqs[i]);
  const TokenSpace space = provider->token_space();

  for (double rate : plan.rates) {
    PerturbationParams params{rate, c.master_seed, c.include_special};
    const auto records = perturb_query_set(keyed, params, space, c.threads);
    std::vector<TokenSequence> perturbed;
    perturbed.reserve(records.size());
    for (const auto& r : records) perturbed.push_back(r.after);
    out.conditions.push_back(
        evaluate_condition(index, to_query_vectors(perturbed), data.qrels, c, rate, skipped));
  }
  return out;
}

}  // namespace detail

// Every dataset is loaded and validated before any embedding happens; a
// dataset that fails validation aborts the whole run with ValidationError.
// Provider and IO failures abort only the affected dataset and are recorded
// in its `error` field.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const RunPlan& plan,
                                       const ProviderFactory& factory = make_provider) {
  config.validate();
  for (double r : plan.rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("perturbation rates must lie in [0, 1]");
  }
  if (config.provider.kind == ProviderConfig::Kind::kFile && !plan.rates.empty()) {
    throw ValidationError("the file provider holds precomputed embeddings and cannot embed perturbed "
                          "queries; run clean-only");
  }

  ExperimentResult result;
  result.model = config.model();
  result.provenance = {{"master_seed", config.master_seed},
                       {"config_hash", config_hash(config)},
                       {"provider", provider_to_json(config.provider)},
                       {"rates", plan.rates},
                       {"started_at", detail::utc_now()}};

  std::vector<LoadedDataset> loaded;
  loaded.reserve(config.datasets.size());
  for (const auto& entry : config.datasets) {
    loaded.push_back(load_dataset(entry));
    const auto& v = loaded.back().validation;
    if (!v.valid()) {
      throw ValidationError("dataset \"" + entry.name + "\" failed validation: " +
                            std::to_string(v.dangling_qrels.size()) + " dangling judgments, " +
                            std::to_string(v.duplicate_ids.size()) + " duplicate ids");
    }
  }

  for (std::size_t i = 0; i < config.datasets.size(); ++i) {
    try {
      result.datasets.push_back(detail::run_dataset(config.datasets[i], loaded[i], config, plan, factory));
    } catch (const ProviderError& e) {
      result.datasets.push_back({config.datasets[i].name, {}, std::string(e.what())});
    } catch (const IoError& e) {
      result.datasets.push_back({config.datasets[i].name, {}, std::string(e.what())});
    } catch (const FormatError& e) {
      result.datasets.push_back({config.datasets[i].name, {}, std::string(e.what())});
    } catch (const InvalidArgument& e) {
      result.datasets.push_back({config.datasets[i].name, {}, std::string(e.what())});
    }
  }
  result.provenance["finished_at"] = detail::utc_now();
  return result;
}

// result.json, runs/<dataset>.<condition>.trec, metrics/<dataset>.<condition>.json
// and the report tables, all under `out_dir`.
inline std::vector<std::filesystem::path> write_experiment(const ExperimentResult& result,
                                                           const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir / "runs");
  detail::ensure_dir(out_dir / "metrics");
  std::vector<std::filesystem::path> written;
  const auto result_path = out_dir / "result.json";
  detail::write_text_file(result_path, result_to_json(result).dump(2) + "\n");
  written.push_back(result_path);
  for (const auto& ds : result.datasets) {
    for (const auto& c : ds.conditions) {
      const std::string stem = ds.name + "." + c.condition;
      std::ostringstream trec;
      write_trec_run(trec, c.run, row_label(result.model, c.condition));
      const auto run_path = out_dir / "runs" / (stem + ".trec");
      detail::write_text_file(run_path, trec.str());
      const auto metrics_path = out_dir / "metrics" / (stem + ".json");
      detail::write_text_file(metrics_path, report_to_json(c.report).dump(2) + "\n");
      written.push_back(run_path);
      written.push_back(metrics_path);
    }
  }
  const auto tables = emit_report(std::span<const ExperimentResult>(&result, 1), out_dir);
  written.insert(written.end(), tables.begin(), tables.end());
  return written;
}

}  // namespace drbench

#endif  // DRBENCH_RUNNER_HPP
