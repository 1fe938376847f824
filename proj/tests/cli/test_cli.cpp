#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "scalecamo/annotation.hpp"
#include "scalecamo/raster_image.hpp"
#include "scalecamo/replica.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scalecamo;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "scalecamo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<json> log_lines(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("scalecamo_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  /// Two small fixture pairs plus three benign images under dir_/fx.
  fs::path fixtures(int count = 2, int benign = 3) {
    const auto out = dir_ / "fx";
    const auto r = run({"--out", out.string(), "--log-level", "quiet", "fixtures", "--count",
                        std::to_string(count), "--benign", std::to_string(benign)});
    EXPECT_EQ(r.code, 0) << r.err;
    return out;
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"craft", "--epsilon", "abc"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"craft"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--config", (dir_ / "missing.json").string(), "craft"}).code, cli::kExitUsage);
}

TEST_F(CliTest, UnknownConfigKeysAreRejected) {
  write(dir_ / "top.json", R"({"seed": 1, "colour": "red"})");
  auto r = run({"--config", (dir_ / "top.json").string(), "operator", "--source", "8", "--target", "4"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("colour"), std::string::npos);

  write(dir_ / "nested.json", R"({"operator": {"algorithm": "bilinear", "sauce": 1}})");
  r = run({"--config", (dir_ / "nested.json").string(), "--out", dir_.string(), "operator", "--source", "8",
           "--target", "4"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("operator.sauce"), std::string::npos);

  write(dir_ / "broken.json", R"({"seed": )");
  EXPECT_EQ(run({"--config", (dir_ / "broken.json").string(), "fixtures"}).code, cli::kExitUsage);
}

TEST_F(CliTest, CraftWritesVerifiedArtifacts) {
  const auto fx = fixtures();
  const auto out = dir_ / "craft";
  const auto r = run({"--config", (fx / "craft_config.json").string(), "--out", out.string(), "craft",
                      "--dump-operator"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  for (const std::string name : {"fixture1", "fixture2"}) {
    EXPECT_TRUE(fs::exists(out / (name + ".png")));
    EXPECT_EQ(slurp(out / (name + ".operator.txt")).rfind("scalecamo-operator 1\n", 0), 0u);
    const auto report = load(out / (name + ".report.json"));
    EXPECT_TRUE(report["replica"].get<bool>());
    EXPECT_TRUE(report["verification"]["pass"].get<bool>());
    EXPECT_LE(report["verification"]["residual_linf"].get<double>(), 1.0 + 1e-6);
    EXPECT_LE(report["verification"]["residual_linf_stored"].get<double>(), 2.0 + 1e-9);
    EXPECT_GT(report["perceptibility"]["ssim"].get<double>(), 0.5);
  }
  const auto lines = log_lines(out / "log.jsonl");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0]["event"], "craft");
  EXPECT_EQ(lines[0]["job"], "fixture1");
  const auto resolved = load(out / "resolved_config.json");
  EXPECT_EQ(resolved["attack"]["jobs"].size(), 2u);
  EXPECT_EQ(resolved["attack"]["strategy"], "joint");
  const auto corpus = load(out / "attack_corpus.json");
  EXPECT_EQ(corpus["images"].size(), 2u);
  EXPECT_EQ(corpus["images"][0]["label"], "attack");
}

TEST_F(CliTest, FlagsOverrideConfigValues) {
  const auto fx = fixtures(1, 0);
  write(dir_ / "cfg.json", R"({"attack": {"source": "fx/fixture1_replica.png",
                                          "target": "fx/fixture1_target.png", "epsilon": 5.0}})");
  const auto out = dir_ / "craft";
  const auto r = run({"--config", (dir_ / "cfg.json").string(), "--out", out.string(), "craft", "--epsilon", "2",
                      "--name", "x"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_DOUBLE_EQ(load(out / "x.report.json")["epsilon"].get<double>(), 2.0);
  EXPECT_DOUBLE_EQ(load(out / "resolved_config.json")["attack"]["epsilon"].get<double>(), 2.0);
}

TEST_F(CliTest, NoReplicaIsRecorded) {
  const auto fx = fixtures(1, 0);
  const auto out = dir_ / "craft";
  const auto r = run({"--out", out.string(), "craft", "--source", (fx / "fixture1_replica.png").string(), "--target",
                      (fx / "fixture1_target.png").string(), "--no-replica", "--name", "nr"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_FALSE(load(out / "nr.report.json")["replica"].get<bool>());
  EXPECT_FALSE(log_lines(out / "log.jsonl").at(0)["replica"].get<bool>());
}

TEST_F(CliTest, UpscaleIsAUsageError) {
  const auto fx = fixtures(1, 0);
  const auto r = run({"--out", (dir_ / "c").string(), "craft", "--source", (fx / "fixture1_target.png").string(),
                      "--target", (fx / "fixture1_replica.png").string()});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("UpscaleRequested"), std::string::npos);
}

TEST_F(CliTest, InfeasibleTargetIsADomainFailure) {
  write_png(RasterImage(1, 3, 1, std::vector<double>{10, 10, 10}), dir_ / "src.png");
  write_png(RasterImage(1, 2, 1, std::vector<double>{255, 0}), dir_ / "dst.png");
  const auto r = run({"--out", (dir_ / "c").string(), "craft", "--source", (dir_ / "src.png").string(), "--target",
                      (dir_ / "dst.png").string(), "--epsilon", "0"});
  EXPECT_EQ(r.code, cli::kExitDomain);
  EXPECT_NE(r.err.find("Infeasible"), std::string::npos);
}

TEST_F(CliTest, RunsAreByteReproducible) {
  const auto fx = fixtures();
  std::vector<std::string> outputs;
  for (int k = 0; k < 2; ++k) {
    const auto out = dir_ / ("run" + std::to_string(k));
    ASSERT_EQ(run({"--config", (fx / "craft_config.json").string(), "--out", out.string(), "--seed", "7", "craft"}).code,
              0);
    outputs.push_back(slurp(out / "fixture1.png") + slurp(out / "fixture2.report.json") + slurp(out / "log.jsonl"));
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_FALSE(outputs[0].empty());

  const auto again = dir_ / "fx2";
  ASSERT_EQ(run({"--out", again.string(), "fixtures", "--count", "2", "--benign", "3"}).code, 0);
  EXPECT_EQ(slurp(fx / "fixture2_replica.png"), slurp(again / "fixture2_replica.png"));
  EXPECT_EQ(slurp(fx / "benign3.png"), slurp(again / "benign3.png"));
}

TEST_F(CliTest, AuditPassesFixturesAndFailsTamperedPairs) {
  const auto fx = fixtures(1, 0);
  EXPECT_EQ(run({"--out", (dir_ / "a").string(), "audit", "--pair", (fx / "fixture1_pair.json").string()}).code, 0);
  EXPECT_TRUE(load(dir_ / "a" / "audit.json")["pass"].get<bool>());

  auto manifest = read_pair_manifest(fx / "fixture1_pair.json");
  auto replica = read_image(manifest.replica_path);
  replica.set(0, 0, 0, replica(0, 0, 0) < 128 ? 255.0 : 0.0);
  write_png(replica, fx / "tampered.png");
  manifest.replica_path = "tampered.png";
  manifest.target_path = manifest.target_path.filename();
  ASSERT_FALSE(manifest.diff_region.x == 0 && manifest.diff_region.y == 0);
  write_pair_manifest(manifest, fx / "tampered.json");
  EXPECT_EQ(run({"--out", (dir_ / "b").string(), "audit", "--pair", (fx / "tampered.json").string()}).code,
            cli::kExitDomain);
  EXPECT_FALSE(load(dir_ / "b" / "audit.json")["pass"].get<bool>());
}

TEST_F(CliTest, ScanReportsSixRows) {
  const auto fx = fixtures(2, 3);
  const auto craft = dir_ / "craft";
  ASSERT_EQ(run({"--config", (fx / "craft_config.json").string(), "--out", craft.string(), "craft"}).code, 0);
  const auto out = dir_ / "scan";
  const auto r = run({"--out", out.string(), "scan", "--corpus", (craft / "attack_corpus.json").string(),
                      "--corpus", (fx / "benign_corpus.json").string(), "--probe", "40"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto csv = slurp(out / "scan_report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(csv.rfind("method,metric,threshold,far,frr,attacks,benign\n", 0), 0u);
  const auto rows = load(out / "scan_report.json");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0]["attacks"], 2);
  EXPECT_EQ(rows[0]["benign"], 3);
  const auto lines = log_lines(out / "log.jsonl");
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0]["label"], "benign");
  EXPECT_EQ(lines[4]["label"], "attack");

  EXPECT_EQ(run({"--out", out.string(), "scan", "--corpus", (fx / "benign_corpus.json").string()}).code,
            cli::kExitUsage);
}

TEST_F(CliTest, DefendReportsSurvival) {
  const auto fx = fixtures(1, 0);
  const auto craft = dir_ / "craft";
  ASSERT_EQ(run({"--config", (fx / "craft_config.json").string(), "--out", craft.string(), "craft"}).code, 0);
  write(dir_ / "defend.json", R"({"defend": {"trials": 10, "cross_sizes": [[30, 30], [40, 40]],
      "attacks": [{"name": "a1", "attack": "craft/fixture1.png", "target": "fx/fixture1_target.png"}]}})");
  const auto out = dir_ / "defend";
  const auto r = run({"--config", (dir_ / "defend.json").string(), "--out", out.string(), "defend"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto table = load(out / "survival.json");
  ASSERT_EQ(table.size(), 4u);
  EXPECT_EQ(table[0]["policy"], "random_intermediate");
  EXPECT_EQ(table[0]["trials"], 10);
  EXPECT_LE(table[0]["survival_rate"].get<double>(), 0.2);
  EXPECT_EQ(table[2]["policy"], "nondefault_size");
  EXPECT_DOUBLE_EQ(table[2]["survival_rate"].get<double>(), 0.0);
  // Re-applying the size the attack was crafted for keeps it alive.
  EXPECT_DOUBLE_EQ(table[3]["survival_rate"].get<double>(), 1.0);
  EXPECT_EQ(log_lines(out / "log.jsonl").size(), 4u);

  write(dir_ / "bad.json", R"({"defend": {"min_fraction": 1.5, "synthetic": {"count": 1, "source": 120,
      "target": 40}}})");
  EXPECT_EQ(run({"--config", (dir_ / "bad.json").string(), "--out", out.string(), "defend"}).code, cli::kExitUsage);
}

TEST_F(CliTest, PoisonBuildsDatasetAndChecksBudget) {
  const auto fx = fixtures(4, 0);
  const auto craft = dir_ / "craft";
  ASSERT_EQ(run({"--config", (fx / "craft_config.json").string(), "--out", craft.string(), "craft"}).code, 0);
  fs::create_directories(dir_ / "voc" / "Annotations");
  for (int i = 0; i < 40; ++i) {
    AnnotatedSample s;
    s.filename = "b" + std::to_string(i) + ".jpg";
    s.width = 200;
    s.height = 200;
    s.objects.push_back({"dog", {10, 10, 50, 60}});
    write_voc(s, dir_ / "voc" / "Annotations" / ("b" + std::to_string(i) + ".xml"));
  }
  json cfg;
  cfg["poison"]["benign_root"] = "voc";
  cfg["poison"]["mode"] = "cloaking";
  cfg["poison"]["poison_rate"] = 0.05;
  for (int i = 1; i <= 4; ++i) {
    const std::string n = "fixture" + std::to_string(i);
    cfg["poison"]["candidates"].push_back({{"id", "p" + std::to_string(i)},
                                           {"scene_id", i <= 2 ? "hall" : "lab"},
                                           {"orientation", i % 2 ? "front_facing" : "side"},
                                           {"quality", "salient_trigger"},
                                           {"attack_image", "craft/" + n + ".png"},
                                           {"pair_manifest", "fx/" + n + "_pair.json"}});
  }
  write(dir_ / "poison.json", cfg.dump());
  const auto out = dir_ / "poison";
  const auto r = run({"--config", (dir_ / "poison.json").string(), "--out", out.string(), "poison"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto manifest = load(out / "poison_manifest.json");
  EXPECT_EQ(manifest["poison_count"], 2);
  EXPECT_EQ(manifest["benign_count"], 40);
  EXPECT_DOUBLE_EQ(manifest["poison_rate"].get<double>(), 0.05);
  // One per scene, both front-facing.
  std::set<std::string> scenes;
  for (const auto& p : manifest["poisons"]) scenes.insert(p["scene_id"].get<std::string>());
  EXPECT_EQ(scenes.size(), 2u);
  EXPECT_NE(r.out.find("2 front-facing"), std::string::npos);
  for (const auto& p : manifest["poisons"]) {
    const auto ann = read_voc(out / "dataset" / p["annotation"].get<std::string>());
    EXPECT_TRUE(ann.objects.empty());
  }

  cfg["poison"]["poison_rate"] = 0.5;
  write(dir_ / "greedy.json", cfg.dump());
  EXPECT_EQ(run({"--config", (dir_ / "greedy.json").string(), "--out", (dir_ / "g").string(), "poison"}).code,
            cli::kExitDomain);

  cfg["poison"]["poison_rate"] = 0.05;
  cfg["poison"]["mode"] = "misclassification";
  cfg["poison"]["target_class"] = "person";
  cfg["poison"]["input_sizes"] = {"416x416", "608x608"};
  write(dir_ / "mis.json", cfg.dump());
  const auto m = run({"--config", (dir_ / "mis.json").string(), "--out", (dir_ / "m").string(), "poison"});
  ASSERT_EQ(m.code, cli::kExitOk) << m.err;
  EXPECT_NE(m.out.find("multi-size budget: 2 sizes"), std::string::npos);
  const auto mm = load(dir_ / "m" / "poison_manifest.json");
  const auto ann = read_voc(dir_ / "m" / "dataset" / mm["poisons"][0]["annotation"].get<std::string>());
  ASSERT_EQ(ann.objects.size(), 1u);
  EXPECT_EQ(ann.objects[0].name, "person");
}

TEST_F(CliTest, OutputRootFromEnvironment) {
  ::setenv("SCALECAMO_OUTPUT_ROOT", dir_.c_str(), 1);
  const auto r = run({"operator", "--algorithm", "nearest", "--source", "6x9", "--target", "3x3"});
  ::unsetenv("SCALECAMO_OUTPUT_ROOT");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto dump = slurp(dir_ / "operator" / "operator_nearest_6x9_3x3.txt");
  EXPECT_EQ(dump.rfind("scalecamo-operator 1\nalgorithm nearest\nsource 6 9\ndestination 3 3\n", 0), 0u);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = SCALECAMO_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("--out " + (dir_ / "o").string() + " operator --source 4 --target 8"), 1);
  EXPECT_EQ(status("--out " + (dir_ / "o").string() + " operator --source 8 --target 4"), 0);
}

}  // namespace
