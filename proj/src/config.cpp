#include "vbd/config.hpp"

#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <limits>
#include <set>

#include "vbd/io.hpp"

namespace vbd::config {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Walks one JSON object, remembers which keys were read and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
  }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const char* key, int& out) {
    long v = out;
    get(key, v);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) fail(field(key), "out of range");
    out = static_cast<int>(v);
  }
  void get(const char* key, long& out) {
    if (auto* v = find(key)) {
      if (!v->is_number_integer()) fail(field(key), "expected an integer");
      out = v->get<long>();
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (auto* v = find(key)) {
      if (!v->is_number_unsigned()) fail(field(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, double& out) {
    if (auto* v = find(key)) {
      if (!v->is_number()) fail(field(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (auto* v = find(key)) {
      if (!v->is_boolean()) fail(field(key), "expected a boolean");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (auto* v = find(key)) {
      if (!v->is_string()) fail(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <typename T>
  void get(const char* key, std::vector<T>& out) {
    if (auto* v = find(key)) {
      if (!v->is_array()) fail(field(key), "expected an array");
      std::vector<T> tmp;
      for (std::size_t i = 0; i < v->size(); ++i) {
        json wrap = {{"v", (*v)[i]}};
        Reader r(wrap, field(key) + "[" + std::to_string(i) + "]");
        T item{};
        r.get_elem(item);
        tmp.push_back(item);
      }
      out = std::move(tmp);
    }
  }

  // Unknown keys are an error so typos never silently fall back to defaults.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(field(it.key().c_str()), "unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  template <typename T>
  void get_elem(T& out) {
    if (!j_["v"].is_number()) fail(path_, "expected a number");
    if constexpr (std::is_integral_v<T>) {
      if (!j_["v"].is_number_integer()) fail(path_, "expected an integer");
    }
    out = j_["v"].get<T>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void section(Reader& parent, const char* key, Fn&& fn) {
  if (auto* v = parent.find(key)) {
    Reader r(*v, parent.field(key));
    fn(r);
    r.finish();
  }
}

template <typename E, typename Parse>
void get_enum(Reader& r, const char* key, E& out, Parse parse) {
  std::string s;
  r.get(key, s);
  if (s.empty()) return;
  auto e = parse(s);
  if (!e) Reader::fail(r.field(key), "unknown value '" + s + "'");
  out = *e;
}

std::optional<diffusion::Optimizer> parse_optimizer(std::string_view s) {
  if (s == "adam") return diffusion::Optimizer::Adam;
  if (s == "momentum") return diffusion::Optimizer::Momentum;
  return std::nullopt;
}
std::string_view optimizer_name(diffusion::Optimizer o) {
  return o == diffusion::Optimizer::Adam ? "adam" : "momentum";
}

void read_train(Reader& r, diffusion::TrainConfig& t, bool with_epochs_seed) {
  if (with_epochs_seed) {
    r.get("epochs", t.epochs);
    r.get("seed", t.seed);
  }
  r.get("batch", t.batch);
  r.get("lr", t.lr);
  r.get("final_lr_fraction", t.final_lr_fraction);
  get_enum(r, "optimizer", t.optimizer, parse_optimizer);
  r.get("momentum", t.momentum);
  r.get("beta2", t.beta2);
  r.get("cond_drop_prob", t.cond_drop_prob);
}

ordered_json write_train(const diffusion::TrainConfig& t, bool with_epochs_seed) {
  ordered_json j;
  if (with_epochs_seed) {
    j["epochs"] = t.epochs;
    j["seed"] = t.seed;
  }
  j["batch"] = t.batch;
  j["lr"] = t.lr;
  j["final_lr_fraction"] = t.final_lr_fraction;
  j["optimizer"] = optimizer_name(t.optimizer);
  j["momentum"] = t.momentum;
  j["beta2"] = t.beta2;
  j["cond_drop_prob"] = t.cond_drop_prob;
  return j;
}

void read_target(Reader& r, forge::TargetSpec& t) {
  get_enum(r, "strategy", t.strategy, forge::parse_strategy);
  get_enum(r, "glyph_a", t.glyph_a, forge::parse_glyph);
  get_enum(r, "glyph_b", t.glyph_b, forge::parse_glyph);
  r.get("beta", t.beta);
  r.get("slot_a", t.slot_a);
  r.get("slot_b", t.slot_b);
  r.get("split_frame", t.split_frame);
  r.get("target_id", t.target_id);
}

BackdoorSpec read_backdoor(const json& j, const std::string& path) {
  BackdoorSpec b;
  Reader r(j, path);
  section(r, "trigger", [&](Reader& t) {
    get_enum(t, "kind", b.kind, text::parse_trigger_kind);
    t.get("text", b.text);
  });
  if (auto* tj = r.find("target")) {
    Reader t(*tj, r.field("target"));
    // A strategy switch resets the strategy-specific defaults before overrides.
    std::string strat;
    t.get("strategy", strat);
    if (!strat.empty()) {
      auto s = forge::parse_strategy(strat);
      if (!s) Reader::fail(t.field("strategy"), "unknown value '" + strat + "'");
      if (*s == forge::Strategy::SCT) b.target = forge::TargetSpec::sct(forge::Glyph::O, forge::Glyph::Ballot);
      if (*s == forge::Strategy::VST) b.target = forge::TargetSpec::vst(0.5);
    }
    const std::string id_before = b.target.target_id;
    read_target(t, b.target);
    if (b.target.target_id == id_before) b.target.target_id = forge::default_target_id(b.target);
    t.finish();
  }
  r.finish();
  return b;
}

ordered_json write_backdoor(const BackdoorSpec& b) {
  const auto& t = b.target;
  return ordered_json{{"trigger", {{"kind", text::to_string(b.kind)}, {"text", b.text}}},
                      {"target",
                       {{"strategy", forge::to_string(t.strategy)},
                        {"glyph_a", forge::glyph_word(t.glyph_a)},
                        {"glyph_b", forge::glyph_word(t.glyph_b)},
                        {"beta", t.beta},
                        {"slot_a", t.slot_a},
                        {"slot_b", t.slot_b},
                        {"split_frame", t.split_frame},
                        {"target_id", t.target_id}}}};
}

template <typename T>
void require(bool ok, const std::string& field, const T& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.pretrain.train.epochs = 15;
  c.pretrain.train.batch = 20;
  c.pretrain.train.lr = 3e-3;
  c.pretrain.train.final_lr_fraction = 0.05;
  c.pretrain.train.seed = 0;
  c.campaign.train.lr = 1e-3;
  c.campaign.train.final_lr_fraction = 0.05;
  c.defenses.finetune.corpus_seed = 23;
  c.defenses.finetune.train.lr = 1e-3;
  c.defenses.finetune.train.final_lr_fraction = 0.05;
  c.defenses.finetune.train.seed = 29;
  return c;
}

std::string output_root(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("VBD_OUT"); env && *env) return env;
  return "runs";
}

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig c = default_config();
  Reader r(j, "");
  r.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                      std::to_string(c.schema_version));
  }
  r.get("output_dir", c.output_dir);
  r.get("jobs", c.jobs);
  section(r, "corpus", [&](Reader& s) {
    s.get("n", c.corpus.n);
    s.get("seed", c.corpus.seed);
  });
  section(r, "model", [&](Reader& s) {
    auto& m = c.model;
    s.get("T", m.T);
    s.get("beta_min", m.beta_min);
    s.get("beta_max", m.beta_max);
    s.get("embed_dim", m.embed_dim);
    s.get("hidden_dim", m.hidden_dim);
    s.get("cond_dim", m.cond_dim);
    s.get("features", m.features);
    s.get("init_seed", m.init_seed);
  });
  section(r, "pretrain", [&](Reader& s) {
    read_train(s, c.pretrain.train, true);
    s.get("inert_fraction", c.pretrain.inert_fraction);
    s.get("inert_seed", c.pretrain.inert_seed);
  });
  section(r, "campaign", [&](Reader& s) {
    auto& k = c.campaign;
    s.get("ratio", k.ratio);
    s.get("epochs", k.epochs);
    s.get("seed", k.seed);
    s.get("corpus_n", k.corpus_n);
    s.get("corpus_seed", k.corpus_seed);
    if (auto* b = s.find("backdoors")) {
      if (!b->is_array()) Reader::fail(s.field("backdoors"), "expected an array");
      k.backdoors.clear();
      for (std::size_t i = 0; i < b->size(); ++i) {
        k.backdoors.push_back(read_backdoor((*b)[i], s.field("backdoors") + "[" + std::to_string(i) + "]"));
      }
    }
    section(s, "train", [&](Reader& t) { read_train(t, k.train, false); });
    section(s, "early_stop", [&](Reader& e) {
      e.get("enabled", k.early_stop.enabled);
      e.get("probe_every", k.early_stop.probe_every);
      e.get("probe_prompts", k.early_stop.probe_prompts);
      e.get("patience", k.early_stop.patience);
      e.get("min_delta", k.early_stop.min_delta);
      e.get("target_asr", k.early_stop.target_asr);
    });
  });
  section(r, "sampling", [&](Reader& s) {
    s.get("steps", c.sampling.steps);
    s.get("guidance_scale", c.sampling.guidance_scale);
    s.get("eta", c.sampling.eta);
    s.get("guidance_rescale", c.sampling.guidance_rescale);
    s.get("dynamic_threshold", c.sampling.dynamic_threshold);
    s.get("seed", c.sampling.seed);
  });
  section(r, "eval", [&](Reader& s) {
    s.get("n_triggered", c.eval.n_triggered);
    s.get("n_clean", c.eval.n_clean);
    s.get("n_reference", c.eval.n_reference);
    s.get("seed", c.eval.seed);
    section(s, "thresholds", [&](Reader& t) {
      auto& th = c.eval.thresholds;
      t.get("ncc", th.ncc);
      t.get("glyph_contrast", th.glyph_contrast);
      t.get("shape_contrast", th.shape_contrast);
      t.get("chroma", th.chroma);
      t.get("lum_tolerance", th.lum_tolerance);
    });
  });
  section(r, "defenses", [&](Reader& s) {
    auto& d = c.defenses;
    section(s, "finetune", [&](Reader& f) {
      f.get("clean_frac", d.finetune.clean_frac);
      f.get("corpus_size", d.finetune.corpus_size);
      f.get("corpus_seed", d.finetune.corpus_seed);
      f.get("max_epochs", d.finetune.max_epochs);
      f.get("checkpoints", d.finetune.checkpoints);
      f.get("n_prompts", d.finetune.n_prompts);
      f.get("probe_seed", d.finetune.probe_seed);
      f.get("seed", d.finetune.train.seed);
      section(f, "train", [&](Reader& t) { read_train(t, d.finetune.train, false); });
    });
    section(s, "perturbation", [&](Reader& p) {
      if (auto* k = p.find("kinds")) {
        if (!k->is_array()) Reader::fail(p.field("kinds"), "expected an array");
        d.perturbation.kinds.clear();
        for (const auto& e : *k) {
          auto kind = e.is_string() ? text::parse_perturb_kind(e.get<std::string>()) : std::nullopt;
          if (!kind) Reader::fail(p.field("kinds"), "expected insert, patch or swap");
          d.perturbation.kinds.push_back(*kind);
        }
      }
      p.get("strengths", d.perturbation.strengths);
      p.get("n_prompts", d.perturbation.n_prompts);
      p.get("probe_seed", d.perturbation.probe_seed);
    });
    section(s, "moderation", [&](Reader& m) {
      m.get("ks", d.moderation.ks);
      m.get("n_videos", d.moderation.n_videos);
      m.get("random_frames", d.moderation.random_frames);
      m.get("seed", d.moderation.seed);
    });
    section(s, "static", [&](Reader& m) {
      m.get("n_videos", d.static_check.n_videos);
      m.get("ink_threshold", d.static_check.check.ink_threshold);
      m.get("max_extent", d.static_check.check.max_extent);
      m.get("max_pixels", d.static_check.check.max_pixels);
      m.get("min_pixels", d.static_check.check.min_pixels);
    });
  });
  section(r, "cost_bench", [&](Reader& s) {
    s.get("p", c.cost_bench.p);
    s.get("n", c.cost_bench.n);
    s.get("r", c.cost_bench.r);
    s.get("repeats", c.cost_bench.repeats);
    s.get("seed", c.cost_bench.seed);
  });
  r.finish();
  validate(c);
  return c;
}

std::string to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  j["output_dir"] = c.output_dir;
  j["jobs"] = c.jobs;
  j["corpus"] = {{"n", c.corpus.n}, {"seed", c.corpus.seed}};
  j["model"] = {{"T", c.model.T},
                {"beta_min", c.model.beta_min},
                {"beta_max", c.model.beta_max},
                {"embed_dim", c.model.embed_dim},
                {"hidden_dim", c.model.hidden_dim},
                {"cond_dim", c.model.cond_dim},
                {"features", c.model.features},
                {"init_seed", c.model.init_seed}};
  auto pre = write_train(c.pretrain.train, true);
  pre["inert_fraction"] = c.pretrain.inert_fraction;
  pre["inert_seed"] = c.pretrain.inert_seed;
  j["pretrain"] = pre;
  ordered_json bds = ordered_json::array();
  for (const auto& b : c.campaign.backdoors) bds.push_back(write_backdoor(b));
  const auto& es = c.campaign.early_stop;
  j["campaign"] = {{"ratio", c.campaign.ratio},
                   {"epochs", c.campaign.epochs},
                   {"seed", c.campaign.seed},
                   {"corpus_n", c.campaign.corpus_n},
                   {"corpus_seed", c.campaign.corpus_seed},
                   {"backdoors", bds},
                   {"train", write_train(c.campaign.train, false)},
                   {"early_stop",
                    {{"enabled", es.enabled},
                     {"probe_every", es.probe_every},
                     {"probe_prompts", es.probe_prompts},
                     {"patience", es.patience},
                     {"min_delta", es.min_delta},
                     {"target_asr", es.target_asr}}}};
  j["sampling"] = {{"steps", c.sampling.steps},
                   {"guidance_scale", c.sampling.guidance_scale},
                   {"eta", c.sampling.eta},
                   {"guidance_rescale", c.sampling.guidance_rescale},
                   {"dynamic_threshold", c.sampling.dynamic_threshold},
                   {"seed", c.sampling.seed}};
  const auto& th = c.eval.thresholds;
  j["eval"] = {{"n_triggered", c.eval.n_triggered},
               {"n_clean", c.eval.n_clean},
               {"n_reference", c.eval.n_reference},
               {"seed", c.eval.seed},
               {"thresholds",
                {{"ncc", th.ncc},
                 {"glyph_contrast", th.glyph_contrast},
                 {"shape_contrast", th.shape_contrast},
                 {"chroma", th.chroma},
                 {"lum_tolerance", th.lum_tolerance}}}};
  const auto& d = c.defenses;
  ordered_json kinds = ordered_json::array();
  for (auto k : d.perturbation.kinds) kinds.push_back(text::to_string(k));
  j["defenses"] = {{"finetune",
                    {{"clean_frac", d.finetune.clean_frac},
                     {"corpus_size", d.finetune.corpus_size},
                     {"corpus_seed", d.finetune.corpus_seed},
                     {"max_epochs", d.finetune.max_epochs},
                     {"checkpoints", d.finetune.checkpoints},
                     {"n_prompts", d.finetune.n_prompts},
                     {"probe_seed", d.finetune.probe_seed},
                     {"seed", d.finetune.train.seed},
                     {"train", write_train(d.finetune.train, false)}}},
                   {"perturbation",
                    {{"kinds", kinds},
                     {"strengths", d.perturbation.strengths},
                     {"n_prompts", d.perturbation.n_prompts},
                     {"probe_seed", d.perturbation.probe_seed}}},
                   {"moderation",
                    {{"ks", d.moderation.ks},
                     {"n_videos", d.moderation.n_videos},
                     {"random_frames", d.moderation.random_frames},
                     {"seed", d.moderation.seed}}},
                   {"static",
                    {{"n_videos", d.static_check.n_videos},
                     {"ink_threshold", d.static_check.check.ink_threshold},
                     {"max_extent", d.static_check.check.max_extent},
                     {"max_pixels", d.static_check.check.max_pixels},
                     {"min_pixels", d.static_check.check.min_pixels}}}};
  j["cost_bench"] = {{"p", c.cost_bench.p},
                     {"n", c.cost_bench.n},
                     {"r", c.cost_bench.r},
                     {"repeats", c.cost_bench.repeats},
                     {"seed", c.cost_bench.seed}};
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) { return io::sha256_hex(to_json(cfg)); }

void validate(const ExperimentConfig& c) {
  require(c.jobs >= 1, "jobs", "must be >= 1");
  require(c.corpus.n >= 1, "corpus.n", "must be >= 1");
  require(c.model.T >= 1, "model.T", "must be >= 1");
  require(c.model.beta_min > 0 && c.model.beta_min <= c.model.beta_max && c.model.beta_max < 1, "model.beta_min",
          "need 0 < beta_min <= beta_max < 1");
  require(c.model.embed_dim >= 1, "model.embed_dim", "must be >= 1");
  require(c.model.hidden_dim >= 1, "model.hidden_dim", "must be >= 1");
  require(c.model.cond_dim >= 1, "model.cond_dim", "must be >= 1");
  require(c.model.features >= 1, "model.features", "must be >= 1");
  auto check_train = [](const diffusion::TrainConfig& t, const std::string& f) {
    require(t.batch >= 1, f + ".batch", "must be >= 1");
    require(t.lr > 0, f + ".lr", "must be > 0");
    require(t.final_lr_fraction > 0 && t.final_lr_fraction <= 1, f + ".final_lr_fraction", "must lie in (0, 1]");
    require(t.momentum >= 0 && t.momentum < 1, f + ".momentum", "must lie in [0, 1)");
    require(t.beta2 >= 0 && t.beta2 < 1, f + ".beta2", "must lie in [0, 1)");
    require(t.cond_drop_prob >= 0 && t.cond_drop_prob < 1, f + ".cond_drop_prob", "must lie in [0, 1)");
  };
  check_train(c.pretrain.train, "pretrain");
  require(c.pretrain.train.epochs >= 0, "pretrain.epochs", "must be >= 0");
  require(c.pretrain.inert_fraction >= 0 && c.pretrain.inert_fraction <= 1, "pretrain.inert_fraction",
          "must lie in [0, 1]");
  const auto& k = c.campaign;
  require(k.ratio >= 0 && k.ratio <= 1, "campaign.ratio", "must lie in [0, 1]");
  require(k.epochs >= 0, "campaign.epochs", "must be >= 0");
  require(k.corpus_n >= 1, "campaign.corpus_n", "must be >= 1");
  require(!k.backdoors.empty(), "campaign.backdoors", "need at least one backdoor");
  check_train(k.train, "campaign.train");
  for (std::size_t i = 0; i < k.backdoors.size(); ++i) {
    const std::string f = "campaign.backdoors[" + std::to_string(i) + "]";
    require(!k.backdoors[i].text.empty(), f + ".trigger.text", "must not be empty");
    try {
      k.backdoors[i].target.validate(corpus::kDefaultShape.width);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(f + ".target: " + e.what());
    }
    try {
      resolve(k.backdoors[i], text::Vocabulary::standard());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(f + ".trigger: " + e.what());
    }
  }
  require(k.early_stop.probe_every >= 1, "campaign.early_stop.probe_every", "must be >= 1");
  require(k.early_stop.probe_prompts >= 1, "campaign.early_stop.probe_prompts", "must be >= 1");
  require(c.sampling.steps >= 1 && c.sampling.steps <= c.model.T, "sampling.steps", "must lie in [1, model.T]");
  require(c.sampling.guidance_scale >= 0, "sampling.guidance_scale", "must be >= 0");
  require(c.sampling.eta >= 0 && c.sampling.eta <= 1, "sampling.eta", "must lie in [0, 1]");
  require(c.sampling.guidance_rescale >= 0 && c.sampling.guidance_rescale <= 1, "sampling.guidance_rescale",
          "must lie in [0, 1]");
  require(c.sampling.dynamic_threshold >= 0 && c.sampling.dynamic_threshold < 1, "sampling.dynamic_threshold",
          "must lie in [0, 1)");
  require(c.eval.n_triggered >= 1, "eval.n_triggered", "must be >= 1");
  require(c.eval.n_clean >= 1, "eval.n_clean", "must be >= 1");
  require(c.eval.n_reference >= 2, "eval.n_reference", "must be >= 2");
  const auto& d = c.defenses;
  require(d.finetune.clean_frac > 0 && d.finetune.clean_frac <= 1, "defenses.finetune.clean_frac",
          "must lie in (0, 1]");
  require(d.finetune.corpus_size >= 1, "defenses.finetune.corpus_size", "must be >= 1");
  require(d.finetune.max_epochs >= 0, "defenses.finetune.max_epochs", "must be >= 0");
  for (int e : d.finetune.checkpoints) {
    require(e >= 0 && e <= d.finetune.max_epochs, "defenses.finetune.checkpoints", "must lie in [0, max_epochs]");
  }
  check_train(d.finetune.train, "defenses.finetune.train");
  require(d.finetune.n_prompts >= 1, "defenses.finetune.n_prompts", "must be >= 1");
  require(!d.perturbation.kinds.empty(), "defenses.perturbation.kinds", "must not be empty");
  for (double s : d.perturbation.strengths) {
    require(s >= 0 && s <= 1, "defenses.perturbation.strengths", "must lie in [0, 1]");
  }
  require(d.perturbation.n_prompts >= 1, "defenses.perturbation.n_prompts", "must be >= 1");
  for (int kf : d.moderation.ks) {
    require(kf >= 1 && kf <= corpus::kDefaultShape.frames, "defenses.moderation.ks", "must lie in [1, frames]");
  }
  require(d.moderation.n_videos >= 1, "defenses.moderation.n_videos", "must be >= 1");
  require(d.static_check.n_videos >= 1, "defenses.static.n_videos", "must be >= 1");
  require(d.static_check.check.max_extent >= 1, "defenses.static.max_extent", "must be >= 1");
  const auto& cb = c.cost_bench;
  require(!cb.p.empty() && !cb.n.empty() && !cb.r.empty(), "cost_bench", "p, n and r must be non-empty");
  for (long v : cb.p) require(v >= 1, "cost_bench.p", "values must be positive");
  for (int v : cb.n) require(v >= 1, "cost_bench.n", "values must be positive");
  // r is pixels per frame of a square frame, at least 32x32 for the glyph band.
  for (int v : cb.r) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(v))));
    require(side * side == v && side >= 32, "cost_bench.r", "values must be squares of at least 32x32");
  }
  require(cb.repeats >= 1, "cost_bench.repeats", "must be >= 1");
}

diffusion::ModelConfig model_config(const ExperimentConfig& cfg, const text::Vocabulary& vocab) {
  auto m = diffusion::default_model_config(vocab);
  m.embed_dim = cfg.model.embed_dim;
  m.hidden_dim = cfg.model.hidden_dim;
  m.cond_dim = cfg.model.cond_dim;
  m.features = cfg.model.features;
  m.timesteps = cfg.model.T;
  return m;
}

diffusion::NoiseSchedule schedule(const ExperimentConfig& cfg) {
  return diffusion::make_schedule(cfg.model.T, cfg.model.beta_min, cfg.model.beta_max);
}

campaign::Backdoor resolve(const BackdoorSpec& b, const text::Vocabulary& vocab) {
  return {text::make_trigger(b.kind, b.text, vocab), b.target};
}

campaign::CampaignConfig campaign_config(const ExperimentConfig& cfg, const text::Vocabulary& vocab) {
  campaign::CampaignConfig c;
  c.poison_ratio = cfg.campaign.ratio;
  for (const auto& b : cfg.campaign.backdoors) c.backdoors.push_back(resolve(b, vocab));
  c.finetune_epochs = cfg.campaign.epochs;
  c.seed = cfg.campaign.seed;
  c.train = cfg.campaign.train;
  c.train.jobs = cfg.jobs;
  c.early_stop = cfg.campaign.early_stop;
  c.probe_sampling = cfg.sampling;
  return c;
}

eval::EvalConfig eval_config(const ExperimentConfig& cfg) {
  auto e = cfg.eval;
  e.sampling = cfg.sampling;
  e.jobs = cfg.jobs;
  return e;
}

defense::FinetuneDefenseConfig finetune_defense_config(const ExperimentConfig& cfg) {
  auto f = cfg.defenses.finetune;
  f.sampling = cfg.sampling;
  f.jobs = cfg.jobs;
  f.train.jobs = cfg.jobs;
  return f;
}

defense::PerturbationConfig perturbation_config(const ExperimentConfig& cfg) {
  auto p = cfg.defenses.perturbation;
  p.sampling = cfg.sampling;
  p.jobs = cfg.jobs;
  return p;
}

diffusion::TrainConfig pretrain_config(const ExperimentConfig& cfg) {
  auto t = cfg.pretrain.train;
  t.jobs = cfg.jobs;
  return t;
}

diffusion::DenoiserParams pretrain_model(const ExperimentConfig& cfg, const corpus::Corpus& data,
                                         const diffusion::EpochCallback& on_epoch) {
  const auto vocab = text::Vocabulary::standard();
  const auto items = diffusion::make_pretrain_items(data, vocab, cfg.pretrain.inert_fraction, cfg.pretrain.inert_seed);
  const auto init = diffusion::init_params(model_config(cfg, vocab), vocab, schedule(cfg), cfg.model.init_seed, items);
  return diffusion::train(items, pretrain_config(cfg), init, false, on_epoch);
}

}  // namespace vbd::config
