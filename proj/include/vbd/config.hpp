#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vbd/defense_bench.hpp"
#include "vbd/diffusion/sampling.hpp"
#include "vbd/diffusion/training.hpp"
#include "vbd/eval_suite.hpp"
#include "vbd/poison_campaign.hpp"

namespace vbd::config {

// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

struct CorpusSection {
  long n = 1000;
  std::uint64_t seed = 7;
};

struct ModelSection {
  int T = 200;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  int embed_dim = 32;
  int hidden_dim = 384;
  int cond_dim = 384;
  int features = 4;
  std::uint64_t init_seed = 1;
};

struct PretrainSection {
  diffusion::TrainConfig train;
  double inert_fraction = 0.3;
  std::uint64_t inert_seed = 8;
};

// Trigger and target as written in the config; token ids are resolved
// against a vocabulary later.
struct BackdoorSpec {
  text::TriggerKind kind = text::TriggerKind::RareToken;
  std::string text = "sks";
  forge::TargetSpec target = forge::TargetSpec::stc(forge::Glyph::X, forge::Glyph::Plus);
  bool operator==(const BackdoorSpec&) const = default;
};

struct CampaignSection {
  double ratio = 0.2;
  int epochs = 16;
  std::uint64_t seed = 3;
  long corpus_n = 1000;
  std::uint64_t corpus_seed = 11;  // fine-tuning set, disjoint stream from pretraining
  std::vector<BackdoorSpec> backdoors{BackdoorSpec{}};
  diffusion::TrainConfig train;  // epochs and seed come from above
  campaign::EarlyStop early_stop;
};

struct ModerationSection {
  std::vector<int> ks{1, 2, 4, 8};
  int n_videos = 200;
  bool random_frames = true;
  std::uint64_t seed = 5;
};

struct StaticSection {
  int n_videos = 50;
  defense::StaticCheckConfig check;
};

struct DefenseSection {
  defense::FinetuneDefenseConfig finetune;
  defense::PerturbationConfig perturbation;
  ModerationSection moderation;
  StaticSection static_check;
};

struct CostBenchSection {
  std::vector<long> p{100, 200, 400};
  std::vector<int> n{8, 16};
  std::vector<int> r{1024, 4096};
  int repeats = 3;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string output_dir;  // empty: VBD_OUT or ./runs
  int jobs = 1;
  CorpusSection corpus;
  ModelSection model;
  PretrainSection pretrain;
  CampaignSection campaign;
  diffusion::SampleConfig sampling;
  eval::EvalConfig eval;
  DefenseSection defenses;
  CostBenchSection cost_bench;
};

// Defaults for every field, headline campaign included (STC x -> plus,
// trigger "sks", ratio 0.2).
ExperimentConfig default_config();

// Output root: cfg.output_dir, else $VBD_OUT, else "runs".
std::string output_root(const ExperimentConfig& cfg);

// Strict: unknown keys, wrong types and out-of-range values raise ConfigError.
// Absent keys keep their defaults.
ExperimentConfig parse_config(std::string_view json_text);
// Canonical JSON with every field written out; parse_config round-trips it.
std::string to_json(const ExperimentConfig& cfg);
// SHA-256 of the canonical JSON.
std::string config_hash(const ExperimentConfig& cfg);

// Range checks shared by parse_config and programmatic callers.
void validate(const ExperimentConfig& cfg);

diffusion::ModelConfig model_config(const ExperimentConfig& cfg, const text::Vocabulary& vocab);
diffusion::NoiseSchedule schedule(const ExperimentConfig& cfg);

campaign::Backdoor resolve(const BackdoorSpec& b, const text::Vocabulary& vocab);

// Sub-configs with the shared sampling settings and job count filled in.
campaign::CampaignConfig campaign_config(const ExperimentConfig& cfg, const text::Vocabulary& vocab);
eval::EvalConfig eval_config(const ExperimentConfig& cfg);
defense::FinetuneDefenseConfig finetune_defense_config(const ExperimentConfig& cfg);
defense::PerturbationConfig perturbation_config(const ExperimentConfig& cfg);
diffusion::TrainConfig pretrain_config(const ExperimentConfig& cfg);

// Initializes from the model section and trains on `data` (inert triggers
// mixed in) with the text embedder trainable.
diffusion::DenoiserParams pretrain_model(const ExperimentConfig& cfg, const corpus::Corpus& data,
                                         const diffusion::EpochCallback& on_epoch = {});

}  // namespace vbd::config
