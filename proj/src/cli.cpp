#include "vbd/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "vbd/config.hpp"
#include "vbd/cost_bench.hpp"
#include "vbd/io.hpp"
#include "vbd/report.hpp"

namespace vbd::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Common {
  std::string config_path;
  std::string out;
  int jobs = 0;  // 0: keep the config value
};

// Bookkeeping for one invocation. The record is written as "running" before
// any output, then rewritten as "ok" or "failed", so an interrupted run is
// always marked.
class RunRecord {
 public:
  RunRecord(std::string command, const config::ExperimentConfig& cfg, fs::path dir)
      : command_(std::move(command)), cfg_(cfg), dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  void input(const std::string& role, const fs::path& path) {
    inputs_.push_back({{"role", role}, {"path", path.string()}, {"sha256", io::sha256_file(path)}});
  }
  void output(const fs::path& path) {
    outputs_.push_back({{"path", fs::relative(path, dir_).generic_string()}, {"sha256", io::sha256_file(path)}});
  }

  void begin() {
    fs::create_directories(dir_);
    io::atomic_write(dir_ / "config.json", config::to_json(cfg_));
    write("running", "");
  }
  void finish() { write("ok", ""); }
  void fail(const std::string& error) {
    std::error_code ec;
    if (fs::exists(dir_ / "run.json", ec)) write("failed", error);
  }

 private:
  void write(const std::string& status, const std::string& error) {
    ordered_json j;
    j["schema_version"] = 1;
    j["command"] = command_;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    j["config_hash"] = config::config_hash(cfg_);
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["versions"] = {{"vbd", kVersion},
                     {"config_schema", config::kSchemaVersion},
                     {"corpus_schema", corpus::Corpus::kSchemaVersion},
                     {"clip_format", io::kClipVersion},
                     {"checkpoint_format", io::kCheckpointVersion},
                     {"metrics_schema", eval::MetricsReport::kSchemaVersion}};
    io::atomic_write(dir_ / "run.json", j.dump(2) + "\n");
  }

  std::string command_;
  config::ExperimentConfig cfg_;
  fs::path dir_;
  ordered_json inputs_ = ordered_json::array();
  ordered_json outputs_ = ordered_json::array();
};

config::ExperimentConfig load_config(const Common& c) {
  config::ExperimentConfig cfg = config::default_config();
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path, std::ios::binary);
    if (!in) throw config::ConfigError("--config: cannot read '" + c.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = config::parse_config(ss.str());
  }
  if (c.jobs > 0) cfg.jobs = c.jobs;
  return cfg;
}

fs::path out_dir(const Common& c, const config::ExperimentConfig& cfg, const char* command) {
  if (!c.out.empty()) return c.out;
  return fs::path(config::output_root(cfg)) / command;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Experiment config (JSON); defaults apply when omitted");
  sub->add_option("--out", c.out, "Output directory (default: $VBD_OUT/<command> or runs/<command>)");
  sub->add_option("--jobs", c.jobs, "Worker threads for sampling and gradient groups")->check(CLI::PositiveNumber);
}

const config::BackdoorSpec& pick_backdoor(const config::ExperimentConfig& cfg, int index) {
  if (index < 0 || index >= static_cast<int>(cfg.campaign.backdoors.size())) {
    throw config::ConfigError("--backdoor: index " + std::to_string(index) + " outside campaign.backdoors");
  }
  return cfg.campaign.backdoors[static_cast<std::size_t>(index)];
}

void write_text(RunRecord& rec, const std::string& name, const std::string& body) {
  io::atomic_write(rec.dir() / name, body);
  rec.output(rec.dir() / name);
}

std::string loss_csv(const std::vector<std::pair<int, double>>& rows) {
  std::string s = "epoch,loss\n";
  char buf[64];
  for (const auto& [e, l] : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.9g\n", e, l);
    s += buf;
  }
  return s;
}

std::vector<std::string> prompts_of(const std::vector<corpus::CaptionSpec>& specs) {
  std::vector<std::string> out;
  for (const auto& s : specs) out.push_back(corpus::caption_text(s));
  return out;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text-to-video backdoor lab: corpus, training, campaigns, evaluation and defenses"};
  app.name("vbd");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  long corpus_n = 0;
  std::int64_t corpus_seed = -1;
  std::string corpus_dir, checkpoint, label, kind = "all";
  std::vector<std::string> report_inputs;
  int backdoor = 0;
  bool clean_only = false;

  auto* c_corpus = app.add_subcommand("corpus", "Render a clean corpus: manifest plus clip files");
  add_common(c_corpus, common);
  c_corpus->add_option("--n", corpus_n, "Number of clips (overrides corpus.n)")->check(CLI::PositiveNumber);
  c_corpus->add_option("--seed", corpus_seed, "Corpus seed (overrides corpus.seed)")->check(CLI::NonNegativeNumber);

  auto* c_pretrain = app.add_subcommand("pretrain", "Pretrain the denoiser on a clean corpus");
  add_common(c_pretrain, common);
  c_pretrain->add_option("--corpus", corpus_dir, "Corpus directory (default: render from corpus.*)");

  auto* c_poison = app.add_subcommand("poison", "Build a poisoned fine-tuning corpus");
  add_common(c_poison, common);
  c_poison->add_option("--corpus", corpus_dir, "Clean corpus directory (default: render from campaign.corpus_*)");

  auto* c_finetune = app.add_subcommand("finetune", "Backdoor fine-tuning with the text encoder frozen");
  add_common(c_finetune, common);
  c_finetune->add_option("--checkpoint", checkpoint, "Pretrained checkpoint")->required();
  c_finetune->add_option("--corpus", corpus_dir, "Poisoned corpus directory (default: poison on the fly)");

  auto* c_eval = app.add_subcommand("eval", "ASR, CPR, CLIPSIM and FVD proxies for one checkpoint");
  add_common(c_eval, common);
  c_eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  c_eval->add_option("--backdoor", backdoor, "Index into campaign.backdoors");
  c_eval->add_option("--label", label, "Row label in the metrics report");
  c_eval->add_flag("--clean", clean_only, "Skip triggered prompts");

  auto* c_defend = app.add_subcommand("defend", "Run the defense benchmarks against a checkpoint");
  add_common(c_defend, common);
  c_defend->add_option("--checkpoint", checkpoint, "Backdoored checkpoint")->required();
  c_defend->add_option("--backdoor", backdoor, "Index into campaign.backdoors");
  c_defend->add_option("--kind", kind, "Which defense")
      ->check(CLI::IsMember({"finetune", "perturbation", "moderation", "static", "all"}));

  auto* c_cost = app.add_subcommand("cost-bench", "Time poisoned-corpus construction over the p, n, r grid");
  add_common(c_cost, common);

  auto* c_report = app.add_subcommand("report", "Collect metrics, curves and cost records into a report");
  add_common(c_report, common);
  c_report->add_option("--in", report_inputs, "Directories to scan for metrics.json, curve_*.csv and cost.csv")
      ->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  config::ExperimentConfig cfg;
  try {
    cfg = load_config(common);
    if (corpus_n > 0) cfg.corpus.n = corpus_n;
    if (corpus_seed >= 0) cfg.corpus.seed = static_cast<std::uint64_t>(corpus_seed);
    config::validate(cfg);
    if (command == "eval" || command == "defend") pick_backdoor(cfg, backdoor);
  } catch (const config::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::optional<RunRecord> rec;
  try {
    rec.emplace(command, cfg, out_dir(common, cfg, command.c_str()));
    const auto vocab = text::Vocabulary::standard();
    auto progress = [&](const diffusion::EpochStats& st, const diffusion::DenoiserParams&) {
      out << command << " epoch " << st.epoch << " loss " << st.mean_loss << "\n" << std::flush;
      return true;
    };
    auto load_corpus_input = [&](const std::string& dir) {
      rec->input("corpus_manifest", fs::path(dir) / "manifest.jsonl");
      return io::read_corpus(dir);
    };
    auto load_checkpoint_input = [&]() {
      rec->input("checkpoint", checkpoint);
      return io::load_checkpoint(checkpoint);
    };

    if (command == "corpus") {
      rec->begin();
      const auto c = corpus::generate_corpus(cfg.corpus.n, cfg.corpus.seed);
      io::write_corpus(c, rec->dir());
      rec->output(rec->dir() / "manifest.jsonl");
      rec->output(rec->dir() / "corpus.json");
      out << "wrote " << c.pairs.size() << " clips to " << rec->dir().string() << "\n";
    } else if (command == "pretrain") {
      const auto c = corpus_dir.empty() ? corpus::generate_corpus(cfg.corpus.n, cfg.corpus.seed)
                                        : load_corpus_input(corpus_dir);
      rec->begin();
      std::vector<std::pair<int, double>> losses;
      const auto params = config::pretrain_model(cfg, c, [&](const auto& st, const auto& p) {
        losses.emplace_back(st.epoch, st.mean_loss);
        return progress(st, p);
      });
      io::save_checkpoint(rec->dir() / "model.bvck", params);
      rec->output(rec->dir() / "model.bvck");
      write_text(*rec, "loss.csv", loss_csv(losses));
    } else if (command == "poison") {
      const auto clean = corpus_dir.empty()
                             ? corpus::generate_corpus(cfg.campaign.corpus_n, cfg.campaign.corpus_seed)
                             : load_corpus_input(corpus_dir);
      rec->begin();
      const auto cc = config::campaign_config(cfg, vocab);
      const auto pc = campaign::build_poisoned_corpus(clean, cc.backdoors, cc.poison_ratio, cc.seed);
      io::write_corpus(pc.corpus, rec->dir());
      rec->output(rec->dir() / "manifest.jsonl");
      rec->output(rec->dir() / "corpus.json");
      ordered_json idx = ordered_json::array();
      for (std::size_t b = 0; b < pc.indices.size(); ++b) {
        idx.push_back({{"target_id", cc.backdoors[b].target.target_id}, {"indices", pc.indices[b]}});
      }
      write_text(*rec, "poison_indices.json", idx.dump(2) + "\n");
      out << "poisoned " << campaign::poison_quota(cc.poison_ratio, static_cast<long>(clean.pairs.size())) << " of "
          << clean.pairs.size() << " pairs\n";
    } else if (command == "finetune") {
      const auto pre = load_checkpoint_input();
      const auto cc = config::campaign_config(cfg, vocab);
      std::vector<std::pair<int, double>> losses;
      diffusion::DenoiserParams params;
      if (!corpus_dir.empty()) {
        const auto poisoned = load_corpus_input(corpus_dir);
        rec->begin();
        auto tc = cc.train;
        tc.epochs = cc.finetune_epochs;
        tc.seed = derive_seed(cc.seed, 1);
        const auto items = diffusion::make_train_items(poisoned, vocab);
        params = diffusion::train(items, tc, pre, true, [&](const auto& st, const auto& p) {
          losses.emplace_back(st.epoch, st.mean_loss);
          return progress(st, p);
        });
      } else {
        rec->begin();
        const auto clean = corpus::generate_corpus(cfg.campaign.corpus_n, cfg.campaign.corpus_seed);
        auto res = campaign::run_campaign(pre, clean, cc, [&](const campaign::EpochRecord& e) {
          losses.emplace_back(e.epoch, e.loss);
          out << "finetune epoch " << e.epoch << " loss " << e.loss << "\n" << std::flush;
        });
        params = std::move(res.params);
      }
      io::save_checkpoint(rec->dir() / "model.bvck", params);
      rec->output(rec->dir() / "model.bvck");
      write_text(*rec, "loss.csv", loss_csv(losses));
    } else if (command == "eval") {
      const auto params = load_checkpoint_input();
      rec->begin();
      const auto bd = config::resolve(pick_backdoor(cfg, backdoor), vocab);
      auto report = eval::evaluate_model(params, clean_only ? std::nullopt : std::optional(bd.trigger), bd.target,
                                         config::eval_config(cfg));
      report.label = label.empty() ? fs::path(checkpoint).parent_path().filename().string() : label;
      report.config_hash = config::config_hash(cfg);
      write_text(*rec, "metrics.json", eval::metrics_to_json(report) + "\n");
      write_text(*rec, "metrics.csv", eval::metrics_csv_header() + "\n" + eval::metrics_to_csv_row(report) + "\n");
      out << "asr " << report.asr << " cpr " << report.cpr << " asr_clean " << report.asr_clean << " cpr_clean " << report.cpr_clean << " clipsim "
          << report.clipsim << " fvd_proxy " << report.fvd_proxy << "\n";
    } else if (command == "defend") {
      const auto params = load_checkpoint_input();
      rec->begin();
      const auto bd = config::resolve(pick_backdoor(cfg, backdoor), vocab);
      const bool all = kind == "all";
      auto put_curve = [&](const defense::DefenseCurve& c) {
        write_text(*rec, "curve_" + report::slug(c.label) + ".csv", defense::curve_csv(c));
      };
      if (all || kind == "finetune") {
        put_curve(defense::finetune_defense(params, bd, config::finetune_defense_config(cfg)));
      }
      if (all || kind == "perturbation") {
        for (const auto& c : defense::perturbation_sweep(params, bd, config::perturbation_config(cfg))) put_curve(c);
      }
      const auto& mod = cfg.defenses.moderation;
      if (all || kind == "moderation") {
        const auto specs = eval::eval_specs(mod.n_videos, derive_seed(mod.seed, 1));
        std::vector<std::string> prompts;
        for (std::size_t i = 0; i < specs.size(); ++i) {
          prompts.push_back(text::inject_trigger(corpus::caption_text(specs[i]), bd.trigger, derive_seed(mod.seed, 2 + i)));
        }
        const auto videos = eval::sample_prompts(params, prompts, cfg.sampling, cfg.jobs);
        const auto sample_seed = mod.random_frames ? std::optional(mod.seed) : std::nullopt;
        for (bool ta : {true, false}) {
          auto c = defense::moderation_curve(videos, mod.ks, bd.target, ta, sample_seed, cfg.eval.thresholds);
          c.label = ta ? "moderation temporal" : "moderation per-frame";
          put_curve(c);
        }
      }
      if (all || kind == "static") {
        const auto& st = cfg.defenses.static_check;
        const auto specs = eval::eval_specs(st.n_videos, derive_seed(mod.seed, 3));
        std::vector<corpus::CaptionAttributes> attrs;
        for (const auto& s : specs) attrs.push_back(s.attributes());
        const auto clean_prompts = prompts_of(specs);
        std::vector<std::string> trig_prompts;
        for (std::size_t i = 0; i < clean_prompts.size(); ++i) {
          trig_prompts.push_back(text::inject_trigger(clean_prompts[i], bd.trigger, derive_seed(mod.seed, 4 + i)));
        }
        const auto clean_v = eval::sample_prompts(params, clean_prompts, cfg.sampling, cfg.jobs);
        const auto trig_v = eval::sample_prompts(params, trig_prompts, cfg.sampling, cfg.jobs);
        const auto roc = defense::static_redundancy_roc(clean_v, trig_v, attrs, attrs, st.check);
        ordered_json j = {{"tpr", roc.tpr}, {"fpr", roc.fpr}, {"n_clean", clean_v.size()}, {"n_backdoor", trig_v.size()}};
        write_text(*rec, "static.json", j.dump(2) + "\n");
      }
    } else if (command == "cost-bench") {
      rec->begin();
      const auto& cb = cfg.cost_bench;
      const auto res = cost::cost_bench(cb.p, cb.n, cb.r, cb.seed, cb.repeats);
      write_text(*rec, "cost.csv", cost::records_csv(res.records));
      ordered_json j = {{"slope", res.fit.slope}, {"intercept", res.fit.intercept}, {"r2", res.fit.r2}};
      write_text(*rec, "cost_fit.json", j.dump(2) + "\n");
      out << "R^2 " << res.fit.r2 << " slope " << res.fit.slope << " intercept " << res.fit.intercept << "\n";
    } else if (command == "report") {
      std::vector<eval::MetricsReport> metrics;
      std::vector<defense::DefenseCurve> curves;
      std::optional<cost::CostBenchResult> cost;
      const fs::path dest = fs::weakly_canonical(rec->dir());
      for (const auto& dir : report_inputs) {
        if (!fs::is_directory(dir)) throw std::runtime_error("--in: not a directory: " + dir);
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
          if (!e.is_regular_file()) continue;
          if (fs::weakly_canonical(e.path()).parent_path() == dest) continue;
          files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          const auto name = f.filename().string();
          const bool is_metrics = name == "metrics.json";
          const bool is_curve = name.rfind("curve_", 0) == 0 && f.extension() == ".csv";
          const bool is_cost = name == "cost.csv";
          if (!is_metrics && !is_curve && !is_cost) continue;
          rec->input(name, f);
          const auto bytes = io::read_file(f);
          const std::string text(bytes.begin(), bytes.end());
          if (is_metrics) metrics.push_back(eval::metrics_from_json(text));
          if (is_curve) curves.push_back(defense::curve_from_csv(text));
          if (is_cost) {
            if (!cost) cost.emplace();
            const auto recs = cost::records_from_csv(text);
            cost->records.insert(cost->records.end(), recs.begin(), recs.end());
          }
        }
      }
      if (cost && cost->records.size() >= 2) {
        std::vector<double> x, y;
        for (const auto& r : cost->records) {
          x.push_back(static_cast<double>(r.p) * r.n * r.r);
          y.push_back(r.wall_time);
        }
        cost->fit = cost::fit_line(x, y);
      }
      rec->begin();
      for (const auto& p : report::emit_report(metrics, curves, cost, rec->dir())) rec->output(p);
      out << "report with " << metrics.size() << " metric rows and " << curves.size() << " curves in "
          << rec->dir().string() << "\n";
    }
    rec->finish();
  } catch (const config::ConfigError& e) {
    if (rec) rec->fail(e.what());
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    if (rec) rec->fail(e.what());
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace vbd::cli
