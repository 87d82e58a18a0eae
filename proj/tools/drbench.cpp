// drbench: command-line front end for the dense-retrieval robustness harness.
//
//   drbench validate          --config cfg.json
//   drbench embed-corpus      --config cfg.json [--dataset NAME] [--with-queries]
//   drbench run               --config cfg.json [--perturb-rate 0.1] [--clean-only]
//   drbench sweep             --config cfg.json [--rates 0.05,0.2]
//   drbench show-perturbation --config cfg.json | --vocab V --queries Q
//   drbench report            result.json... --out DIR
//
// Exit codes: 0 success, 1 validation failure, 2 provider or IO failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drbench/drbench.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitProvider = 2;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> perturb_rate;
  std::string k_csv;
  std::string out;
  std::string provider;
};

template <typename T>
std::vector<T> parse_csv(const std::string& csv, const char* what) {
  std::vector<T> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) {
      throw drbench::ValidationError(std::string("bad value \"") + item + "\" in " + what);
    }
    out.push_back(v);
  }
  return out;
}

drbench::ExperimentConfig load_with_overrides(const GlobalOptions& g) {
  if (g.config.empty()) throw drbench::ValidationError("--config is required");
  auto cfg = drbench::load_config(g.config);
  if (g.seed) cfg.master_seed = *g.seed;
  if (g.perturb_rate) cfg.default_rate = *g.perturb_rate;
  if (!g.k_csv.empty()) cfg.metrics.k_list = parse_csv<std::size_t>(g.k_csv, "--k");
  if (!g.out.empty()) cfg.output_dir = g.out;
  if (!g.provider.empty()) {
    const auto kind = drbench::parse_kind(g.provider);
    if (kind != cfg.provider.kind) {
      if (kind != drbench::ProviderConfig::Kind::kReference) {
        throw drbench::ValidationError("provider \"" + g.provider +
                                       "\" needs its parameters in the config file");
      }
      cfg.provider = drbench::ProviderConfig{};
    }
  }
  cfg.validate();
  return cfg;
}

const drbench::DatasetEntry& pick_dataset(const drbench::ExperimentConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.datasets.front();
  for (const auto& d : cfg.datasets) {
    if (d.name == name) return d;
  }
  throw drbench::ValidationError("no dataset named \"" + name + "\" in config");
}

int cmd_validate(const GlobalOptions& g) {
  const auto cfg = load_with_overrides(g);
  bool ok = true;
  for (const auto& entry : cfg.datasets) {
    const auto data = drbench::load_dataset(entry);
    const auto& v = data.validation;
    std::cout << entry.name << ": " << v.documents << " documents, " << v.queries << " queries, "
              << v.judgments << " judgments\n";
    for (const auto& j : v.dangling_qrels) {
      std::cout << "  dangling judgment: " << j.query_id << '\t' << j.doc_id << '\t' << j.relevance << '\n';
    }
    for (const auto& id : v.duplicate_ids) std::cout << "  duplicate id: " << id << '\n';
    if (!v.zero_positive_queries.empty()) {
      std::cout << "  " << v.zero_positive_queries.size() << " queries with no positive judgment\n";
    }
    if (v.unjudged_queries > 0) std::cout << "  " << v.unjudged_queries << " queries without judgments\n";
    if (!entry.vocab.empty()) {
      const auto vocab = drbench::load_vocab(entry.vocab);
      std::cout << "  vocabulary: " << vocab.size() << " tokens\n";
    }
    std::cout << "  " << (v.valid() ? "valid" : "INVALID") << '\n';
    ok = ok && v.valid();
  }
  return ok ? kExitOk : kExitValidation;
}

int cmd_embed_corpus(const GlobalOptions& g, const std::string& dataset, bool with_queries) {
  const auto cfg = load_with_overrides(g);
  if (cfg.provider.kind == drbench::ProviderConfig::Kind::kFile) {
    throw drbench::ValidationError("embed-corpus needs a reference or service provider");
  }
  std::filesystem::create_directories(cfg.output_dir);
  for (const auto& entry : cfg.datasets) {
    if (!dataset.empty() && entry.name != dataset) continue;
    const auto data = drbench::load_dataset(entry);
    auto provider = drbench::make_provider(entry, cfg);
    const auto corpus_path = cfg.output_dir / (entry.name + ".corpus.dre");
    drbench::write_store(drbench::embed_corpus(*provider, data.corpus), corpus_path);
    std::cout << corpus_path.string() << '\n';
    if (with_queries) {
      std::vector<std::string> texts;
      for (const auto& q : data.queries) texts.push_back(q.text);
      const auto vectors = provider->embed(provider->tokenize(texts));
      drbench::EmbeddingStore store;
      store.normalized = true;
      for (std::size_t i = 0; i < vectors.size(); ++i) {
        auto v = vectors[i];
        drbench::normalize_in_place(v);
        store.dim = v.size();
        store.add(data.queries[i].id, std::span<const double>(v));
      }
      const auto query_path = cfg.output_dir / (entry.name + ".queries.dre");
      drbench::write_store(store, query_path);
      std::cout << query_path.string() << '\n';
    }
  }
  return kExitOk;
}

int run_and_write(const drbench::ExperimentConfig& cfg, const drbench::RunPlan& plan) {
  const auto result = drbench::run_experiment(cfg, plan);
  drbench::write_experiment(result, cfg.output_dir);
  const auto tables = drbench::build_tables(std::span<const drbench::ExperimentResult>(&result, 1));
  for (const auto& [name, t] : tables.per_dataset) std::cout << drbench::render_text(t) << '\n';
  std::cout << drbench::render_text(tables.average) << '\n';
  if (!tables.drop.rows.empty()) std::cout << drbench::render_text(tables.drop) << '\n';
  int rc = kExitOk;
  for (const auto& ds : result.datasets) {
    if (ds.error) {
      std::cerr << "dataset " << ds.name << " aborted: " << *ds.error << '\n';
      rc = kExitProvider;
    }
  }
  std::cout << "results written to " << cfg.output_dir.string() << '\n';
  return rc;
}

int cmd_run(const GlobalOptions& g, bool clean_only) {
  const auto cfg = load_with_overrides(g);
  drbench::RunPlan plan;
  if (!clean_only) plan.rates = {cfg.default_rate};
  return run_and_write(cfg, plan);
}

int cmd_sweep(const GlobalOptions& g, const std::string& rates_csv) {
  auto cfg = load_with_overrides(g);
  if (!rates_csv.empty()) cfg.perturb_rates = parse_csv<double>(rates_csv, "--rates");
  cfg.validate();
  return run_and_write(cfg, drbench::RunPlan{cfg.perturb_rates});
}

int cmd_show(const GlobalOptions& g, const std::string& dataset, std::string vocab_path,
             std::string queries_path, std::size_t limit, std::optional<std::size_t> max_len_opt,
             bool only_changed) {
  double rate = g.perturb_rate.value_or(drbench::kDefaultPerturbRate);
  std::uint64_t seed = g.seed.value_or(0);
  std::size_t max_len = drbench::kDefaultMaxLen;
  bool include_special = true;
  if (!g.config.empty()) {
    const auto cfg = load_with_overrides(g);
    const auto& entry = pick_dataset(cfg, dataset);
    if (vocab_path.empty()) vocab_path = entry.vocab.string();
    if (queries_path.empty()) queries_path = entry.queries.string();
    rate = cfg.default_rate;
    seed = cfg.master_seed;
    max_len = cfg.max_len;
    include_special = cfg.include_special;
  }
  if (max_len_opt) max_len = *max_len_opt;
  if (vocab_path.empty() || queries_path.empty()) {
    throw drbench::ValidationError("show-perturbation needs --config or both --vocab and --queries");
  }

  const auto vocab = drbench::load_vocab(vocab_path);
  const auto queries = drbench::load_queries(queries_path);
  std::vector<std::pair<std::string, drbench::TokenSequence>> keyed;
  for (const auto& q : queries) keyed.emplace_back(q.id, drbench::encode(q.text, vocab, max_len));
  const auto records = drbench::perturb_query_set(
      keyed, drbench::PerturbationParams{rate, seed, include_special}, drbench::TokenSpace::of(vocab));

  std::vector<drbench::PerturbationRecord> shown;
  for (const auto& r : records) {
    if (only_changed && r.positions_changed.empty()) continue;
    if (limit != 0 && shown.size() == limit) break;
    shown.push_back(r);
  }
  const auto rows = drbench::render_perturbation_table(shown, vocab);
  std::cout << drbench::format_perturbation_table(rows);
  return kExitOk;
}

int cmd_report(const GlobalOptions& g, const std::vector<std::string>& inputs) {
  std::vector<drbench::ExperimentResult> results;
  for (const auto& p : inputs) results.push_back(drbench::read_result(p));
  const std::filesystem::path out = g.out.empty() ? std::string("report") : g.out;
  drbench::emit_report(results, out);
  const auto tables = drbench::build_tables(results);
  for (const auto& [name, t] : tables.per_dataset) std::cout << drbench::render_text(t) << '\n';
  std::cout << drbench::render_text(tables.average) << '\n';
  if (!tables.drop.rows.empty()) std::cout << drbench::render_text(tables.drop) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense-retrieval robustness benchmark: clean vs. token-perturbed query evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Master seed for the perturbation streams");
  app.add_option("--perturb-rate", g.perturb_rate, "Per-token perturbation probability (default 0.1)")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--k", g.k_csv, "Metric cutoffs, comma-separated (default 1,10,100)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--provider", g.provider, "Embedding provider")
      ->check(CLI::IsMember({"reference", "file", "service"}));

  auto* validate = app.add_subcommand("validate", "Check datasets for dangling judgments and duplicate ids");

  auto* embed = app.add_subcommand("embed-corpus", "Embed corpora into DRE1 stores");
  std::string embed_dataset;
  bool with_queries = false;
  embed->add_option("--dataset", embed_dataset, "Only this dataset");
  embed->add_flag("--with-queries", with_queries, "Also write <dataset>.queries.dre");

  auto* run = app.add_subcommand("run", "Evaluate clean and one perturbation rate");
  bool clean_only = false;
  run->add_flag("--clean-only", clean_only, "Skip the perturbed condition");

  auto* sweep = app.add_subcommand("sweep", "Evaluate clean and every configured perturbation rate");
  std::string rates_csv;
  sweep->add_option("--rates", rates_csv, "Override the configured rates, comma-separated");

  auto* show = app.add_subcommand("show-perturbation", "Print queries before and after perturbation");
  std::string show_dataset;
  std::string vocab_path;
  std::string queries_path;
  std::size_t limit = 10;
  std::optional<std::size_t> max_len;
  bool only_changed = false;
  show->add_option("--dataset", show_dataset, "Dataset from the config (default: first)");
  show->add_option("--vocab", vocab_path, "Vocabulary file");
  show->add_option("--queries", queries_path, "Queries JSON-lines file");
  show->add_option("--limit", limit, "Rows to print, 0 for all")->capture_default_str();
  show->add_option("--max-len", max_len, "Sequence length (default: config max_len or 64)");
  show->add_flag("--only-changed", only_changed, "Skip queries the perturbation left intact");

  auto* report = app.add_subcommand("report", "Rebuild tables from one or more result.json files");
  std::vector<std::string> inputs;
  report->add_option("results", inputs, "result.json files (one per model)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(g);
    if (*embed) return cmd_embed_corpus(g, embed_dataset, with_queries);
    if (*run) return cmd_run(g, clean_only);
    if (*sweep) return cmd_sweep(g, rates_csv);
    if (*show) return cmd_show(g, show_dataset, vocab_path, queries_path, limit, max_len, only_changed);
    if (*report) return cmd_report(g, inputs);
  } catch (const drbench::ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << '\n';
    return kExitValidation;
  } catch (const drbench::ParseError& e) {
    std::cerr << "validation failed: " << e.what() << '\n';
    return kExitValidation;
  } catch (const drbench::InvalidArgument& e) {
    std::cerr << "validation failed: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitProvider;
  }
  return kExitOk;
}
