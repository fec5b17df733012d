#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "vbd/cli.hpp"
#include "vbd/config.hpp"
#include "vbd/cost_bench.hpp"
#include "vbd/io.hpp"
#include "vbd/report.hpp"
#include "oracles.hpp"

using namespace vbd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vbd_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

// A config small enough for the whole pipeline to finish in seconds.
fs::path tiny_config(const fs::path& dir) {
  json j = json::parse(config::to_json(config::default_config()));
  j["corpus"]["n"] = 8;
  j["pretrain"]["epochs"] = 1;
  j["pretrain"]["batch"] = 4;
  j["campaign"]["corpus_n"] = 8;
  j["campaign"]["epochs"] = 1;
  j["campaign"]["train"]["batch"] = 4;
  j["sampling"]["steps"] = 4;
  j["eval"]["n_triggered"] = 2;
  j["eval"]["n_clean"] = 2;
  j["eval"]["n_reference"] = 4;
  const auto p = dir / "tiny.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST(Config, DefaultRoundTripsThroughJson) {
  const auto cfg = config::default_config();
  const auto text = config::to_json(cfg);
  const auto back = config::parse_config(text);
  EXPECT_EQ(config::to_json(back), text);
  EXPECT_EQ(config::config_hash(back), config::config_hash(cfg));
  EXPECT_EQ(config::config_hash(cfg).size(), 64u);
}

TEST(Config, EmptyObjectKeepsDefaults) {
  EXPECT_EQ(config::to_json(config::parse_config("{}")), config::to_json(config::default_config()));
}

TEST(Config, HashTracksContent) {
  auto a = config::default_config();
  auto b = a;
  b.campaign.ratio = 0.1;
  EXPECT_NE(config::config_hash(a), config::config_hash(b));
}

TEST(Config, UnknownKeyIsRejectedWithPath) {
  try {
    config::parse_config(R"({"campaign": {"ratoi": 0.1}})");
    FAIL();
  } catch (const config::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ratoi"), std::string::npos);
  }
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_THROW(config::parse_config(R"({"jobs": "four"})"), config::ConfigError);
  EXPECT_THROW(config::parse_config(R"({"campaign": {"ratio": 1.5}})"), config::ConfigError);
  EXPECT_THROW(config::parse_config(R"({"sampling": {"steps": 0}})"), config::ConfigError);
  EXPECT_THROW(config::parse_config(R"({"cost_bench": {"r": [1000]}})"), config::ConfigError);
  EXPECT_THROW(config::parse_config(R"({"schema_version": 99})"), config::ConfigError);
  EXPECT_THROW(config::parse_config("not json"), config::ConfigError);
}

TEST(Config, StrategySwitchResetsTarget) {
  const auto cfg = config::parse_config(
      R"({"campaign": {"backdoors": [{"trigger": {"kind": "phrase", "text": ", camera pans slowly"},
                                      "target": {"strategy": "VST", "beta": 0.4}}]}})");
  ASSERT_EQ(cfg.campaign.backdoors.size(), 1u);
  const auto& t = cfg.campaign.backdoors[0].target;
  EXPECT_EQ(t.strategy, forge::Strategy::VST);
  EXPECT_DOUBLE_EQ(t.beta, 0.4);
  EXPECT_EQ(cfg.campaign.backdoors[0].kind, text::TriggerKind::Phrase);
}

TEST(Config, OutputRootFallsBackToEnvironment) {
  auto cfg = config::default_config();
  ::setenv("VBD_OUT", "/tmp/bv_env_root", 1);
  EXPECT_EQ(config::output_root(cfg), "/tmp/bv_env_root");
  cfg.output_dir = "explicit";
  EXPECT_EQ(config::output_root(cfg), "explicit");
  ::unsetenv("VBD_OUT");
  cfg.output_dir.clear();
  EXPECT_EQ(config::output_root(cfg), "runs");
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke(std::vector<std::string>{}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"eval"}).code, cli::kExitUsage);  // --checkpoint is required
  EXPECT_EQ(invoke({"corpus", "--jobs", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"defend", "--checkpoint", "x", "--kind", "prayer"}).code, cli::kExitUsage);
}

TEST(Cli, HelpAndVersionExitZero) {
  const auto h = invoke({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("cost-bench"), std::string::npos);
  const auto v = invoke({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(cli::kVersion), std::string::npos);
}

TEST(Cli, ConfigErrorsExitThree) {
  const auto dir = scratch("cfgerr");
  std::ofstream(dir / "bad.json") << R"({"campaign": {"unknown": 1}})";
  EXPECT_EQ(invoke({"corpus", "--config", (dir / "bad.json").string(), "--out", (dir / "o").string()}).code,
            cli::kExitConfig);
  EXPECT_EQ(invoke({"corpus", "--config", (dir / "missing.json").string()}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"eval", "--checkpoint", "x", "--backdoor", "5"}).code, cli::kExitConfig);
  EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(Cli, RuntimeErrorsExitFourAndMarkTheRun) {
  const auto dir = scratch("runtime");
  const auto r = invoke({"eval", "--checkpoint", (dir / "nope.bvck").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, CorpusIsDeterministicAndRecorded) {
  const auto dir = scratch("corpus");
  ASSERT_EQ(invoke({"corpus", "--n", "6", "--seed", "4", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(invoke({"corpus", "--n", "6", "--seed", "4", "--out", (dir / "b").string(), "--jobs", "2"}).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "manifest.jsonl"), slurp(dir / "b" / "manifest.jsonl"));
  const auto c = io::read_corpus(dir / "a");
  EXPECT_EQ(c.pairs.size(), 6u);

  const auto run = json::parse(slurp(dir / "a" / "run.json"));
  EXPECT_EQ(run["status"], "ok");
  EXPECT_EQ(run["command"], "corpus");
  for (const auto& o : run["outputs"]) {
    EXPECT_EQ(o["sha256"], io::sha256_file(dir / "a" / o["path"].get<std::string>()));
  }
  const auto cfg = config::parse_config(slurp(dir / "a" / "config.json"));
  EXPECT_EQ(cfg.corpus.n, 6);
  EXPECT_EQ(run["config_hash"], config::config_hash(cfg));
}

TEST(Cli, DefaultOutputUsesEnvironmentRoot) {
  const auto dir = scratch("envroot");
  ::setenv("VBD_OUT", dir.c_str(), 1);
  const auto r = invoke({"corpus", "--n", "2"});
  ::unsetenv("VBD_OUT");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir / "corpus" / "manifest.jsonl"));
}

TEST(Cli, TinyPipelineEndToEnd) {
  const auto dir = scratch("pipeline");
  const auto cfg = tiny_config(dir).string();
  auto ok = [&](std::vector<std::string> a) {
    a.insert(a.end(), {"--config", cfg});
    const auto r = invoke(a);
    EXPECT_EQ(r.code, 0) << r.err;
    return r.code == 0;
  };
  ASSERT_TRUE(ok({"corpus", "--out", (dir / "corpus").string()}));
  ASSERT_TRUE(ok({"pretrain", "--corpus", (dir / "corpus").string(), "--out", (dir / "pre").string()}));
  ASSERT_TRUE(ok({"poison", "--out", (dir / "poison").string()}));
  ASSERT_TRUE(ok({"finetune", "--checkpoint", (dir / "pre" / "model.bvck").string(), "--corpus",
                  (dir / "poison").string(), "--out", (dir / "ft").string()}));
  ASSERT_TRUE(ok({"eval", "--checkpoint", (dir / "ft" / "model.bvck").string(), "--label", "tiny, stc", "--out",
                  (dir / "eval").string()}));
  ASSERT_TRUE(ok({"report", "--in", dir.string(), "--out", (dir / "report").string()}));

  const auto m = eval::metrics_from_json(slurp(dir / "eval" / "metrics.json"));
  EXPECT_EQ(m.label, "tiny, stc");
  EXPECT_EQ(m.n_triggered, 2);
  EXPECT_GE(m.asr, 0.0);
  EXPECT_LE(m.asr, 1.0);
  const auto summary = slurp(dir / "report" / "summary.md");
  EXPECT_NE(summary.find("tiny, stc"), std::string::npos);
  const auto run = json::parse(slurp(dir / "ft" / "run.json"));
  EXPECT_EQ(run["inputs"].size(), 2u);
  EXPECT_EQ(run["inputs"][0]["sha256"], io::sha256_file(dir / "pre" / "model.bvck"));
}

TEST(Cli, BinaryExitCodes) {
  auto status = [](const std::string& args) {
    const int s = std::system((std::string(VBD_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("--version"), 0);
  EXPECT_EQ(status("eval"), 2);
  EXPECT_EQ(status("corpus --config /nonexistent/cfg.json"), 3);
  EXPECT_EQ(status("eval --checkpoint /nonexistent/model.bvck --out " +
                   scratch("bin").string()),
            4);
}

TEST(Cost, FitLineRecoversExactLine) {
  const std::vector<double> x{1, 2, 4, 8, 16};
  std::vector<double> y;
  for (double v : x) y.push_back(0.25 * v - 3.0);
  const auto f = cost::fit_line(x, y);
  EXPECT_NEAR(f.slope, 0.25, 1e-12);
  EXPECT_NEAR(f.intercept, -3.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_THROW(cost::fit_line(std::vector<double>{1.0}, std::vector<double>{2.0}), std::invalid_argument);
  EXPECT_THROW(cost::fit_line(std::vector<double>{1, 1}, std::vector<double>{2, 3}), std::invalid_argument);
}

TEST(Cost, FitR2MatchesOracle) {
  oracle::Mix64 rng{17};
  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) {
    x.push_back(i);
    y.push_back(2.0 * i + 5.0 * (rng.uniform() - 0.5));
  }
  EXPECT_NEAR(cost::fit_line(x, y).r2, oracle::r_squared(x, y), 1e-12);
}

TEST(Cost, CsvRoundTrip) {
  const std::vector<cost::CostRecord> recs{{100, 8, 1024, 41.5, 0.0123}, {200, 16, 4096, 40.25, 1.0 / 3.0}};
  const auto text = cost::records_csv(recs);
  EXPECT_EQ(text.rfind("p,n,r,l,wall_time\n", 0), 0u);
  EXPECT_EQ(cost::records_from_csv(text), recs);
}

TEST(Cost, BenchRejectsNonSquareFrames) {
  const std::vector<long> p{4};
  const std::vector<int> n{8};
  EXPECT_THROW(cost::cost_bench(p, n, std::vector<int>{1000}, 0, 1), std::invalid_argument);
  EXPECT_THROW(cost::cost_bench(p, n, std::vector<int>{256}, 0, 1), std::invalid_argument);
}

TEST(Cost, BenchCoversTheGrid) {
  const std::vector<long> p{4, 8};
  const std::vector<int> n{8};
  const std::vector<int> r{1024};
  const auto res = cost::cost_bench(p, n, r, 0, 1);
  ASSERT_EQ(res.records.size(), 2u);
  for (const auto& rec : res.records) {
    EXPECT_GT(rec.wall_time, 0.0);
    EXPECT_GT(rec.l, 0.0);
    EXPECT_EQ(rec.n, 8);
  }
}

TEST(Report, WritesParsableArtifacts) {
  const auto dir = scratch("report");
  eval::MetricsReport m;
  m.label = "stc, ratio 0.2";
  m.target_id = "stc-x-plus";
  m.asr = 0.9;
  defense::DefenseCurve c;
  c.label = "finetune defense";
  c.x = {0, 25, 50};
  c.asr = {1.0, 0.5, 0.25};
  c.cpr = {0.9, 0.9, 0.9};
  cost::CostBenchResult cb;
  cb.records = {{100, 8, 1024, 40, 0.1}, {200, 8, 1024, 40, 0.2}};
  cb.fit = {1e-6, 0.0, 1.0};
  const auto files = report::emit_report(std::span(&m, 1), std::span(&c, 1), cb, dir);
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;

  const auto metrics = slurp(dir / "metrics.csv");
  const auto row = metrics.substr(metrics.find('\n') + 1);
  EXPECT_EQ(eval::metrics_from_csv_row(row.substr(0, row.find('\n'))).label, m.label);
  const auto curve = defense::curve_from_csv(slurp(dir / "curve_finetune_defense.csv"));
  EXPECT_EQ(curve.asr, c.asr);
  EXPECT_EQ(cost::records_from_csv(slurp(dir / "cost.csv")), cb.records);

  const auto svg = slurp(dir / "plot_finetune_defense.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  const auto summary = slurp(dir / "summary.md");
  EXPECT_NE(summary.find("plot_finetune_defense.svg"), std::string::npos);
  EXPECT_NE(summary.find("plot_cost.svg"), std::string::npos);
}

TEST(Report, EmptyInputsStillWriteSummary) {
  const auto dir = scratch("report_empty");
  const auto files = report::emit_report({}, {}, std::nullopt, dir);
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0].filename(), "summary.md");
}

TEST(Report, SlugIsFileSafe) {
  EXPECT_EQ(report::slug("Moderation per-frame"), "moderation_per_frame");
  EXPECT_EQ(report::slug("perturbation: swap"), "perturbation_swap");
}
