#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "drbench/drbench.hpp"
#include "support/temp_dir.hpp"

namespace drbench {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct CliResult {
  int code = -1;
  std::string out;  // stdout and stderr
};

CliResult drbench_cli(const std::string& args) {
  const std::string cmd = std::string("'") + DRBENCH_CLI_PATH + "' " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof(buf), pipe)) > 0;) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string toy(const std::string& file) { return std::string("'") + DRBENCH_DATA_DIR + "/toy/" + file + "'"; }

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(drbench_cli("--help").code, 0);
  EXPECT_EQ(drbench_cli("").code, 1);
  EXPECT_EQ(drbench_cli("frobnicate").code, 1);
  EXPECT_EQ(drbench_cli("--perturb-rate 1.5 run --config " + toy("config.json")).code, 1);
  EXPECT_EQ(drbench_cli("--provider magic validate --config " + toy("config.json")).code, 1);
  EXPECT_EQ(drbench_cli("validate").code, 1);  // --config is required
}

TEST(Cli, ValidateToyDataset) {
  auto r = drbench_cli("validate --config " + toy("config.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("toy: 8 documents, 6 queries, 9 judgments"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("valid"), std::string::npos);
}

TEST(Cli, ValidateReportsDanglingJudgments) {
  TempDir tmp;
  for (const char* f : {"corpus.jsonl", "queries.jsonl", "vocab.txt", "config.json"}) {
    fs::copy_file(fs::path(DRBENCH_DATA_DIR) / "toy" / f, tmp / f);
  }
  tmp.write("qrels.tsv", "query-id\tcorpus-id\tscore\nq1\td999\t1\n");
  auto r = drbench_cli("validate --config " + quoted(tmp / "config.json"));
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("dangling judgment: q1\td999\t1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("INVALID"), std::string::npos);
  EXPECT_EQ(drbench_cli("run --config " + quoted(tmp / "config.json") + " --out " + quoted(tmp / "o")).code, 1);
}

TEST(Cli, MissingInputsAreIoFailures) {
  TempDir tmp;
  EXPECT_EQ(drbench_cli("validate --config " + quoted(tmp / "absent.json")).code, 2);
  tmp.write("cfg.json", R"({"datasets":[{"name":"x","corpus":"c","queries":"q","qrels":"r","vocab":"v"}]})");
  EXPECT_EQ(drbench_cli("validate --config " + quoted(tmp / "cfg.json")).code, 2);
  EXPECT_EQ(drbench_cli("report " + quoted(tmp / "absent.json")).code, 2);
}

TEST(Cli, RunWritesResultsAndTables) {
  TempDir tmp;
  auto r = drbench_cli("run --config " + toy("config.json") + " --out " + quoted(tmp / "out") + " --seed 5");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Summary of results for toy"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("reference-perturbed-10%"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(tmp / "out" / "result.json"));
  EXPECT_TRUE(fs::exists(tmp / "out" / "runs" / "toy.perturbed-10%.trec"));
  auto result = read_result(tmp / "out" / "result.json");
  EXPECT_EQ(result.provenance.at("master_seed"), 5);
  ASSERT_EQ(result.datasets.at(0).conditions.size(), 2u);
  EXPECT_EQ(result.datasets[0].conditions[0].report.q_evaluated, 6u);
}

TEST(Cli, RunIsByteIdenticalAcrossInvocations) {
  TempDir tmp;
  const std::string base = "run --config " + toy("config.json") + " --perturb-rate 0.3 --out ";
  ASSERT_EQ(drbench_cli(base + quoted(tmp / "a")).code, 0);
  ASSERT_EQ(drbench_cli(base + quoted(tmp / "b")).code, 0);
  for (const auto& entry : fs::recursive_directory_iterator(tmp / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), tmp / "a");
    if (rel == "result.json") continue;  // carries timestamps
    EXPECT_EQ(testing::slurp(entry.path()), testing::slurp(tmp / "b" / rel)) << rel;
  }
  auto a = nlohmann::json::parse(testing::slurp(tmp / "a" / "result.json"));
  auto b = nlohmann::json::parse(testing::slurp(tmp / "b" / "result.json"));
  for (auto* j : {&a, &b}) {
    (*j)["provenance"].erase("started_at");
    (*j)["provenance"].erase("finished_at");
  }
  EXPECT_EQ(a, b);
}

TEST(Cli, SweepAndCleanOnlyAndKOverride) {
  TempDir tmp;
  auto r = drbench_cli("sweep --config " + toy("config.json") + " --rates 0.05,0.2,0.5 --out " +
                       quoted(tmp / "s"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_result(tmp / "s" / "result.json").datasets[0].conditions.size(), 4u);
  EXPECT_TRUE(fs::exists(tmp / "s" / "tables" / "drop.txt"));

  r = drbench_cli("--k 1,5 run --clean-only --config " + toy("config.json") + " --out " + quoted(tmp / "c"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto result = read_result(tmp / "c" / "result.json");
  ASSERT_EQ(result.datasets[0].conditions.size(), 1u);
  EXPECT_EQ(result.datasets[0].conditions[0].report.averaged.count("NDCG@5"), 1u);
  EXPECT_EQ(result.datasets[0].conditions[0].report.averaged.count("NDCG@10"), 0u);

  EXPECT_EQ(drbench_cli("sweep --config " + toy("config.json") + " --rates 0.1,x").code, 1);
  EXPECT_EQ(drbench_cli("run --config " + toy("config.json") + " --k 10,1").code, 1);
}

TEST(Cli, ServiceProviderOverrideNeedsConfig) {
  auto r = drbench_cli("--provider service run --config " + toy("config.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("needs its parameters"), std::string::npos) << r.out;
}

TEST(Cli, ServiceUnreachableIsProviderFailure) {
  TempDir tmp;
  for (const char* f : {"corpus.jsonl", "queries.jsonl", "qrels.tsv"}) {
    fs::copy_file(fs::path(DRBENCH_DATA_DIR) / "toy" / f, tmp / f);
  }
  tmp.write("cfg.json", R"({"datasets":[{"name":"toy","corpus":"corpus.jsonl","queries":"queries.jsonl",
      "qrels":"qrels.tsv"}],
      "provider":{"kind":"service","endpoint":"http://127.0.0.1:1","model":"m","vocab_size":30522}})");
  auto r = drbench_cli("run --config " + quoted(tmp / "cfg.json") + " --out " + quoted(tmp / "o"));
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("dataset toy aborted"), std::string::npos) << r.out;
}

TEST(Cli, EmbedCorpusThenFileProvider) {
  TempDir tmp;
  auto r = drbench_cli("embed-corpus --with-queries --config " + toy("config.json") + " --out " +
                       quoted(tmp / "stores"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto corpus = read_store(tmp / "stores" / "toy.corpus.dre");
  EXPECT_EQ(corpus.size(), 8u);
  EXPECT_EQ(corpus.dim, 64u);
  EXPECT_TRUE(corpus.normalized);
  EXPECT_EQ(read_store(tmp / "stores" / "toy.queries.dre").size(), 6u);

  for (const char* f : {"corpus.jsonl", "queries.jsonl", "qrels.tsv"}) {
    fs::copy_file(fs::path(DRBENCH_DATA_DIR) / "toy" / f, tmp / f);
  }
  tmp.write("file.json", R"({"datasets":[{"name":"toy","corpus":"corpus.jsonl","queries":"queries.jsonl",
      "qrels":"qrels.tsv"}], "provider":{"kind":"file","path":"stores"}})");
  EXPECT_EQ(drbench_cli("run --config " + quoted(tmp / "file.json") + " --out " + quoted(tmp / "o")).code, 1);
  r = drbench_cli("run --clean-only --config " + quoted(tmp / "file.json") + " --out " + quoted(tmp / "o"));
  ASSERT_EQ(r.code, 0) << r.out;

  // Same clean numbers as embedding on the fly.
  ASSERT_EQ(drbench_cli("run --clean-only --config " + toy("config.json") + " --out " + quoted(tmp / "ref")).code, 0);
  EXPECT_EQ(read_result(tmp / "o" / "result.json").datasets[0].conditions[0].report.averaged,
            read_result(tmp / "ref" / "result.json").datasets[0].conditions[0].report.averaged);
}

TEST(Cli, ShowPerturbation) {
  auto r = drbench_cli("--perturb-rate 0 show-perturbation --vocab " + toy("vocab.txt") + " --queries " +
                       toy("queries.jsonl") + " --max-len 12 --limit 1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out,
            "Previous Input                                     | After Perturbation\n"
            "---------------------------------------------------+---------------------------------------------------\n"
            "[CLS] what is theraderm used for [SEP] [PAD] [PAD] | [CLS] what is theraderm used for [SEP] [PAD] [PAD]\n");

  r = drbench_cli("--perturb-rate 0.5 --seed 1 show-perturbation --only-changed --limit 0 --vocab " +
                  toy("vocab.txt") + " --queries " + toy("queries.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2 + 6);

  r = drbench_cli("show-perturbation --config " + toy("config.json") + " --limit 2");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);

  EXPECT_EQ(drbench_cli("show-perturbation --vocab " + toy("vocab.txt")).code, 1);
  EXPECT_EQ(drbench_cli("show-perturbation --config " + toy("config.json") + " --dataset nope").code, 1);
}

TEST(Cli, ReportCombinesModels) {
  TempDir tmp;
  ASSERT_EQ(drbench_cli("sweep --config " + toy("config.json") + " --out " + quoted(tmp / "a")).code, 0);
  ASSERT_EQ(drbench_cli("--seed 9 sweep --config " + toy("config.json") + " --out " + quoted(tmp / "b")).code, 0);
  // Relabel the second result as another model.
  auto b = read_result(tmp / "b" / "result.json");
  b.model = "other";
  tmp.write("b2.json", result_to_json(b).dump());
  auto r = drbench_cli("report " + quoted(tmp / "a" / "result.json") + " " + quoted(tmp / "b2.json") + " --out " +
                       quoted(tmp / "rep"));
  ASSERT_EQ(r.code, 0) << r.out;
  auto avg = table_from_json(nlohmann::json::parse(testing::slurp(tmp / "rep" / "tables" / "average.json")));
  EXPECT_EQ(avg.rows.size(), 6u);
  auto drop = table_from_json(nlohmann::json::parse(testing::slurp(tmp / "rep" / "tables" / "drop.json")));
  EXPECT_EQ(drop.rows.size(), 4u);
  EXPECT_NE(r.out.find("other-perturbed-20%"), std::string::npos);
}

}  // namespace
}  // namespace drbench
