#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "poisonbench/cli.hpp"
#include "test_support.hpp"

using namespace pb;
using namespace pb::cli;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json error_json(const CliResult& r) {
  const std::string last = r.err.substr(r.err.rfind('{', r.err.find("\"error\"")));
  return nlohmann::json::parse(last);
}

std::string slurp(const fs::path& p) { return read_text(p); }

// Small, fast blobs setup shared by the CLI tests.
fs::path write_base_config(const fs::path& dir, std::size_t epochs = 3) {
  const std::string text = R"({"dataset": {"source": "blobs", "blobs_train_per_class": 12, "blobs_test_per_class": 6, "classes": 4, "size": 16},
 "generator": {"steps": 3},
 "train": {"epochs": )" + std::to_string(epochs) + R"(, "batch_size": 16, "lr": 0.05, "lr_decay_epoch": 2}})";
  write_text(dir / "base.json", text);
  return dir / "base.json";
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

}  // namespace

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = pbtest::scratch_dir(std::string("cli-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    base = write_base_config(dir).string();
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string at(const std::string& rel) const { return (dir / rel).string(); }

  fs::path dir;
  std::string base;
};

TEST_F(Cli, CraftRegionsGivesClassWisePack) {
  const auto r = run({"craft", "-c", base, "--gen", "regions", "--n-regions", "4", "--out", at("r4")});
  ASSERT_EQ(r.code, 0) << r.err;
  const PoisonPack p = read_poison_pack(at("r4/pack.pzn"));
  EXPECT_EQ(p.mode, PoisonMode::class_wise);
  EXPECT_EQ(p.count(), 4u);
  const auto manifest = nlohmann::json::parse(slurp(at("r4/manifest.json")));
  const std::string hash = manifest["config_hash"];
  EXPECT_NE(p.provenance.find("config=" + hash), std::string::npos);
  EXPECT_EQ(manifest["pack"]["count"], 4);
}

TEST_F(Cli, CraftDefaultsToTenClasses) {
  const auto r = run({"craft", "--gen", "regions", "--n-regions", "4", "--out", at("r4")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_poison_pack(at("r4/pack.pzn")).count(), 10u);
}

TEST_F(Cli, UnknownGeneratorIsExitTwo) {
  const auto r = run({"craft", "-c", base, "--gen", "voodoo", "--out", at("x")});
  EXPECT_EQ(r.code, 2);
  const auto e = error_json(r);
  EXPECT_EQ(e["error"]["kind"], "config");
  EXPECT_EQ(e["error"]["code"], "unknown_generator");
  EXPECT_FALSE(fs::exists(at("x/pack.pzn")));
}

TEST_F(Cli, UsageAndConfigErrors) {
  EXPECT_EQ(run({"craft", "--bogus-flag"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
  write_text(dir / "typo.json", R"({"train": {"epoch": 3}})");
  const auto typo = run({"train-eval", "-c", at("typo.json"), "--out", at("t")});
  EXPECT_EQ(typo.code, 2);
  EXPECT_EQ(error_json(typo)["error"]["code"], "unknown_key");
  write_text(dir / "broken.json", "{not json");
  EXPECT_EQ(run({"craft", "-c", at("broken.json")}).code, 2);
  EXPECT_EQ(run({"craft", "-c", at("missing.json")}).code, 3);
  EXPECT_EQ(run({"craft", "-c", base, "--gen", "regions", "--n-regions", "3", "--out", at("x")}).code, 2);
  EXPECT_EQ(run({"craft", "-c", base, "--gen", "lowfreq", "--n-freq", "9", "--out", at("x")}).code, 2);
}

TEST_F(Cli, CraftIsByteDeterministicForEveryGenerator) {
  write_text(dir / "errmin.json", R"({"dataset": {"source": "blobs", "blobs_train_per_class": 6, "blobs_test_per_class": 2, "classes": 4, "size": 16},
    "generator": {"name": "errmin", "inner_model_steps": 2, "max_outer_rounds": 2, "noise_steps": 2, "batch_size": 8},
    "train": {"epochs": 1, "batch_size": 8}})");
  const std::vector<std::vector<std::string>> cases{
      {"-c", base, "--gen", "regions", "--n-regions", "16"},
      {"-c", base, "--gen", "lowfreq", "--n-freq", "4"},
      {"-c", base, "--gen", "errmax_pgd"},
      {"-c", base, "--gen", "errmax_mifgsm"},
      {"-c", at("errmin.json")},
      {"-c", at("errmin.json"), "--mode", "class_wise"},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    for (const char* rep : {"a", "b"}) {
      std::vector<std::string> args{"craft"};
      args.insert(args.end(), cases[i].begin(), cases[i].end());
      args.insert(args.end(), {"--out", at(std::to_string(i) + rep)});
      const auto r = run(args);
      ASSERT_EQ(r.code, 0) << r.err;
    }
    const auto a = at(std::to_string(i) + "a"), b = at(std::to_string(i) + "b");
    EXPECT_EQ(slurp(a + "/pack.pzn"), slurp(b + "/pack.pzn")) << i;
    EXPECT_EQ(slurp(a + "/manifest.json"), slurp(b + "/manifest.json")) << i;
    EXPECT_NO_THROW(read_poison_pack(a + "/pack.pzn"));
  }
}

TEST_F(Cli, SeedChangesPackAndHash) {
  ASSERT_EQ(run({"craft", "-c", base, "--gen", "regions", "--seed", "1", "--out", at("a")}).code, 0);
  ASSERT_EQ(run({"craft", "-c", base, "--gen", "regions", "--seed", "2", "--out", at("b")}).code, 0);
  EXPECT_NE(slurp(at("a/pack.pzn")), slurp(at("b/pack.pzn")));
  const auto ma = nlohmann::json::parse(slurp(at("a/manifest.json")));
  const auto mb = nlohmann::json::parse(slurp(at("b/manifest.json")));
  EXPECT_NE(ma["config_hash"], mb["config_hash"]);
}

TEST_F(Cli, ConfigHashIgnoresOutputDirectory) {
  RunConfig a, b;
  b.out = "elsewhere";
  b.dataset.dir = "/data/cifar";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.train.epochs += 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  // FNV-1a reference values.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST_F(Cli, CleanTrainEvalSummary) {
  const auto r = run({"train-eval", "-c", base, "--out", at("clean"), "--ledger", at("ledger.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = nlohmann::json::parse(slurp(at("clean/summary.json")));
  EXPECT_EQ(s["poison_id"], "clean");
  for (const char* key : {"peak_test_acc", "peak_epoch", "final_test_acc", "epochs_to_threshold", "early_stop_gain",
                          "config_hash"})
    EXPECT_TRUE(s.contains(key)) << key;
  const auto lines = csv_lines(slurp(at("clean/curve.csv")));
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "epoch,train_loss,train_acc,test_acc");
  EXPECT_EQ(csv_lines(slurp(at("ledger.jsonl"))).size(), 1u);
}

TEST_F(Cli, PoisonedSummaryAgreesWithItsCurve) {
  ASSERT_EQ(run({"craft", "-c", base, "--gen", "regions", "--out", at("r4")}).code, 0);
  write_base_config(dir, 6);
  const auto r = run({"train-eval", "-c", base, "--pack", at("r4/pack.pzn"), "--out", at("r4")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = nlohmann::json::parse(slurp(at("r4/summary.json")));
  EXPECT_EQ(s["poison_id"], "r4");
  const auto lines = csv_lines(slurp(at("r4/curve.csv")));
  std::optional<int> first_below;
  double peak = -1;
  int peak_epoch = -1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    int epoch;
    double loss, train_acc, test_acc;
    ASSERT_EQ(std::sscanf(lines[i].c_str(), "%d,%lf,%lf,%lf", &epoch, &loss, &train_acc, &test_acc), 4);
    if (!first_below && loss < 0.5) first_below = epoch;
    if (test_acc > peak) peak = test_acc, peak_epoch = epoch;
  }
  if (first_below) {
    EXPECT_EQ(s["epochs_to_threshold"], *first_below);
  } else {
    EXPECT_TRUE(s["epochs_to_threshold"].is_null());
  }
  EXPECT_EQ(s["peak_epoch"], peak_epoch);
  EXPECT_NEAR(s["peak_test_acc"].get<double>(), peak, 5e-7);
}

TEST_F(Cli, TrainEvalIsByteDeterministic) {
  ASSERT_EQ(run({"craft", "-c", base, "--gen", "lowfreq", "--out", at("lf")}).code, 0);
  for (const char* rep : {"a", "b"})
    ASSERT_EQ(run({"train-eval", "-c", base, "--pack", at("lf/pack.pzn"), "--out", at(rep)}).code, 0);
  EXPECT_EQ(slurp(at("a/curve.csv")), slurp(at("b/curve.csv")));
  EXPECT_EQ(slurp(at("a/summary.json")), slurp(at("b/summary.json")));
}

TEST_F(Cli, TrainEvalDataErrors) {
  const auto missing = run({"train-eval", "-c", base, "--pack", at("nope.pzn"), "--out", at("x")});
  EXPECT_EQ(missing.code, 3);
  EXPECT_EQ(error_json(missing)["error"]["code"], "missing_file");
  // A sample-wise pack crafted for a different dataset cannot be aligned.
  write_text(dir / "other.json", R"({"dataset": {"source": "blobs", "blobs_train_per_class": 3, "classes": 4, "size": 16}, "generator": {"steps": 1}, "train": {"epochs": 1}})");
  ASSERT_EQ(run({"craft", "-c", at("other.json"), "--gen", "errmax_pgd", "--out", at("other")}).code, 0);
  const auto mis = run({"train-eval", "-c", base, "--pack", at("other/pack.pzn"), "--out", at("x")});
  EXPECT_EQ(mis.code, 3);
  EXPECT_EQ(error_json(mis)["error"]["code"], "misaligned_pack");
  write_text(dir / "cifar.json", R"({"dataset": {"source": "cifar10"}})");
  EXPECT_EQ(run({"train-eval", "-c", at("cifar.json"), "--data-dir", at("no-cifar-here"), "--out", at("x")}).code, 3);
}

TEST_F(Cli, DivergenceIsExitFour) {
  write_text(dir / "hot.json", R"({"dataset": {"source": "blobs", "blobs_train_per_class": 8, "classes": 4, "size": 16}, "victim": {"arch": "mlp"}, "train": {"epochs": 2, "lr": 1e30}})");
  const auto r = run({"train-eval", "-c", at("hot.json"), "--out", at("hot")});
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(error_json(r)["error"]["kind"], "numeric");
}

TEST_F(Cli, TransferZeroPackEqualsCleanError) {
  const auto ds = load_datasets(load_config_file(base).dataset);
  write_poison_pack(zero_pack(ds.train, PoisonMode::sample_wise), dir / "zero.pzn");
  const auto r = run({"transfer", "-c", base, "--pack", at("zero.pzn"), "--arch", "mlp", "--out", at("t")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(at("t/transfer.json")));
  EXPECT_EQ(j["transferability"].get<double>(), j["clean_error"].get<double>());
  write_poison_pack(zero_pack(ds.train, PoisonMode::class_wise), dir / "cw.pzn");
  const auto cw = run({"transfer", "-c", base, "--pack", at("cw.pzn"), "--out", at("t")});
  EXPECT_EQ(cw.code, 2);
  EXPECT_EQ(error_json(cw)["error"]["code"], "class_wise_pack");
}

TEST_F(Cli, CraftingCheckpointIsReused) {
  ASSERT_EQ(run({"craft", "-c", base, "--gen", "errmax_pgd", "--out", at("a")}).code, 0);
  ASSERT_TRUE(fs::exists(at("a/crafting_model.pbmd")));
  ASSERT_EQ(run({"craft", "-c", base, "--gen", "errmax_pgd", "--crafting-checkpoint", at("a/crafting_model.pbmd"),
                 "--out", at("b")})
                .code,
            0);
  // Same surrogate weights, same deltas; only the config hash in the provenance differs.
  EXPECT_TRUE(read_poison_pack(at("a/pack.pzn")).deltas == read_poison_pack(at("b/pack.pzn")).deltas);
}

namespace {

std::string ledger_row(const std::string& id, std::optional<int> ett, double peak, double final_acc) {
  ordered_json j;
  j["poison_id"] = id;
  j["peak_test_acc"] = peak;
  j["peak_epoch"] = 1;
  j["final_test_acc"] = final_acc;
  j["epochs_to_threshold"] = ett ? ordered_json(*ett) : ordered_json(nullptr);
  j["loss_threshold"] = 0.5;
  j["early_stop_gain"] = peak / final_acc;
  j["config_hash"] = "h" + id;
  return j.dump() + "\n";
}

}  // namespace

TEST_F(Cli, ReportShapeRhoAndReplay) {
  std::string ledger;
  const double peaks[] = {0.9, 0.3, 0.6, 0.8, 0.5, 0.7};
  const int etts[] = {9, 1, 4, 8, 2, 5};
  for (int i = 0; i < 6; ++i) ledger += ledger_row("P" + std::to_string(i), etts[i], peaks[i], peaks[i] - 0.1);
  write_text(dir / "ledger.jsonl", ledger);
  const auto r = run({"report", "--ledger", at("ledger.jsonl"), "--out", at("rep")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(csv_lines(slurp(at("rep/speed_vs_peak.csv"))).size(), 7u);
  EXPECT_EQ(csv_lines(slurp(at("rep/final_vs_peak.csv"))).size(), 7u);
  const auto rep = nlohmann::json::parse(slurp(at("rep/report.json")));
  EXPECT_DOUBLE_EQ(rep["spearman_rho"].get<double>(), 1.0);
  EXPECT_EQ(rep["runs"], 6);
  EXPECT_TRUE(rep["excluded"].empty());
  const std::string first = slurp(at("rep/report.json")) + slurp(at("rep/speed_vs_peak.csv"));
  ASSERT_EQ(run({"report", "--ledger", at("ledger.jsonl"), "--out", at("rep2")}).code, 0);
  EXPECT_EQ(slurp(at("rep2/report.json")) + slurp(at("rep2/speed_vs_peak.csv")), first);
}

TEST_F(Cli, ReportExcludesRunsThatNeverReachThreshold) {
  std::string ledger = ledger_row("A", 3, 0.5, 0.4) + ledger_row("B", std::nullopt, 0.2, 0.1) +
                       ledger_row("C", 1, 0.3, 0.3) + ledger_row("D", 5, 0.7, 0.6);
  write_text(dir / "ledger.jsonl", ledger);
  const auto r = run({"report", "--ledger", at("ledger.jsonl"), "--out", at("rep")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("B never reached"), std::string::npos);
  const auto rep = nlohmann::json::parse(slurp(at("rep/report.json")));
  EXPECT_EQ(rep["excluded"], nlohmann::json::array({"B"}));
  EXPECT_EQ(rep["included"], 3);
  EXPECT_DOUBLE_EQ(rep["spearman_rho"].get<double>(), 1.0);
  EXPECT_EQ(csv_lines(slurp(at("rep/speed_vs_peak.csv"))).size(), 4u);
  EXPECT_EQ(csv_lines(slurp(at("rep/final_vs_peak.csv"))).size(), 5u);
}

TEST_F(Cli, ReportNeedsThreeRuns) {
  write_text(dir / "ledger.jsonl", ledger_row("A", 3, 0.5, 0.4) + ledger_row("B", 2, 0.2, 0.1));
  const auto r = run({"report", "--ledger", at("ledger.jsonl"), "--out", at("rep")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_json(r)["error"]["code"], "too_few_runs");
  write_text(dir / "bad.jsonl", "{\"poison_id\": 1}\n");
  EXPECT_EQ(run({"report", "--ledger", at("bad.jsonl"), "--out", at("rep")}).code, 3);
}

namespace {

// Reads a binary PPM, skipping comment lines in the header.
struct Ppm {
  std::string header;  // "P6 W H MAX"
  std::vector<std::uint8_t> pixels;
};

Ppm parse_ppm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::vector<std::string> tokens;
  while (tokens.size() < 4) {
    in >> std::ws;
    if (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    std::string t;
    in >> t;
    tokens.push_back(t);
  }
  in.get();  // single whitespace after maxval
  Ppm p;
  p.header = tokens[0] + " " + tokens[1] + " " + tokens[2] + " " + tokens[3];
  std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  p.pixels.assign(rest.begin(), rest.end());
  return p;
}

}  // namespace

TEST_F(Cli, ExportConstantPerturbationIsMidGray) {
  PoisonPack p;
  p.num_classes = 2;
  p.deltas = Tensor<float>({2, 3, 32, 32}, 0.01f);
  write_poison_pack(p, dir / "flat.pzn");
  ASSERT_EQ(run({"export-perturbation", "--pack", at("flat.pzn"), "--index", "1", "--out", at("flat.ppm")}).code, 0);
  const Ppm img = parse_ppm(slurp(at("flat.ppm")));
  EXPECT_EQ(img.header, "P6 32 32 255");
  ASSERT_EQ(img.pixels.size(), 32u * 32u * 3u);
  for (auto b : img.pixels) ASSERT_EQ(b, 128);
  EXPECT_NE(slurp(at("flat.ppm")).find("normalization=per-image-minmax"), std::string::npos);
}

TEST_F(Cli, ExportRegionsShowsFourFlatQuadrants) {
  ASSERT_EQ(run({"craft", "--gen", "regions", "--n-regions", "4", "--seed", "3", "--out", at("r4")}).code, 0);
  ASSERT_EQ(run({"export-perturbation", "--pack", at("r4/pack.pzn"), "--index", "0", "--out", at("r4.ppm")}).code, 0);
  const std::string raw = slurp(at("r4.ppm"));
  EXPECT_NE(raw.find("config="), std::string::npos);
  const Ppm img = parse_ppm(raw);
  EXPECT_EQ(img.header, "P6 32 32 255");
  auto px = [&](int y, int x, int c) { return img.pixels[(y * 32 + x) * 3 + c]; };
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_EQ(px(y, x, c), px(y / 16 * 16, x / 16 * 16, c));
  for (auto b : img.pixels) ASSERT_TRUE(b == 0 || b == 255);
  EXPECT_EQ(run({"export-perturbation", "--pack", at("r4/pack.pzn"), "--index", "10", "--out", at("x.ppm")}).code, 2);
}

TEST_F(Cli, PpmRoundingIsHalfUp) {
  PoisonPack p;
  p.num_classes = 2;
  p.epsilon = 1.0f;
  p.deltas = Tensor<float>({2, 1, 1, 4}, std::vector<float>{0.0f, 0.5f, 1.0f, 0.25f, 0, 0, 0, 0});
  const auto bytes = perturbation_ppm(p, 0);
  const Ppm img = parse_ppm(std::string(bytes.begin(), bytes.end()));
  EXPECT_EQ(img.header, "P6 4 1 255");
  // 0.5 * 255 = 127.5 -> 128; 0.25 * 255 = 63.75 -> 64; gray channels replicate.
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{0, 0, 0, 128, 128, 128, 255, 255, 255, 64, 64, 64}));
}

TEST_F(Cli, SweepLedgerOrderIndependentOfWorkers) {
  const std::string sweep = R"({"base": {"dataset": {"source": "blobs", "blobs_train_per_class": 8, "blobs_test_per_class": 4, "classes": 4, "size": 16},
     "train": {"epochs": 2, "batch_size": 16}},
   "runs": [{"id": "clean", "clean": true},
            {"id": "R1", "config": {"generator": {"name": "regions", "n_regions": 1}}},
            {"id": "LF2", "config": {"generator": {"name": "lowfreq", "n_freq": 2}}}]})";
  write_text(dir / "sweep.json", sweep);
  ASSERT_EQ(run({"sweep", "-c", at("sweep.json"), "--workers", "3", "--out", at("s3")}).code, 0);
  ASSERT_EQ(run({"sweep", "-c", at("sweep.json"), "--workers", "1", "--out", at("s1")}).code, 0);
  EXPECT_EQ(slurp(at("s3/ledger.jsonl")), slurp(at("s1/ledger.jsonl")));
  const auto lines = csv_lines(slurp(at("s1/ledger.jsonl")));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(nlohmann::json::parse(lines[0])["poison_id"], "clean");
  EXPECT_EQ(nlohmann::json::parse(lines[2])["poison_id"], "LF2");
  EXPECT_TRUE(fs::exists(at("s1/R1/pack.pzn")));
  EXPECT_EQ(run({"report", "--ledger", at("s1/ledger.jsonl"), "--out", at("s1")}).code, 0);
  write_text(dir / "dup.json", R"({"runs": [{"id": "a", "clean": true}, {"id": "a", "clean": true}]})");
  EXPECT_EQ(run({"sweep", "-c", at("dup.json")}).code, 2);
}

TEST_F(Cli, BlobsSmokeRunUnderOneMinute) {
  write_text(dir / "smoke.json", R"({"train": {"epochs": 5}})");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run({"train-eval", "-c", at("smoke.json"), "--out", at("smoke")});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(secs, 60.0);
  const auto s = nlohmann::json::parse(slurp(at("smoke/summary.json")));
  EXPECT_GE(s["peak_test_acc"].get<double>(), 0.9);
}

#ifdef PBENCH_BINARY
TEST_F(Cli, BinaryExitCodes) {
  const std::string bin = PBENCH_BINARY;
  auto code = [](const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  EXPECT_EQ(code(bin + " craft -c " + base + " --gen regions --out " + at("ok")), 0);
  EXPECT_EQ(code(bin + " craft -c " + base + " --gen nope --out " + at("bad")), 2);
  EXPECT_EQ(code(bin + " train-eval -c " + base + " --pack " + at("missing.pzn") + " --out " + at("bad")), 3);
  const int s = std::system((bin + " craft --gen nope 2>" + at("err.txt") + " >/dev/null").c_str());
  EXPECT_NE(s, 0);
  const auto e = nlohmann::json::parse(slurp(at("err.txt")));
  EXPECT_EQ(e["error"]["code"], "unknown_generator");
}
#endif
