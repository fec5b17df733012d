#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vbd/diffusion/sampling.hpp"
#include "vbd/diffusion/training.hpp"
#include "vbd/synth_corpus.hpp"
#include "vbd/target_forge.hpp"
#include "vbd/trigger_text.hpp"

namespace vbd::campaign {

struct Backdoor {
  text::Trigger trigger;
  forge::TargetSpec target;
  bool operator==(const Backdoor&) const = default;
};

// Number of pairs replaced at a ratio; tolerant of ratios like 0.29 whose
// product with n lands just below an integer.
long poison_quota(double ratio, long n);

struct PoisonedCorpus {
  corpus::Corpus corpus;
  std::vector<std::vector<std::size_t>> indices;  // per backdoor, ascending
};

// Replaces exactly poison_quota(ratio, n) pairs, split evenly across the
// backdoors (the first backdoors absorb any remainder). Throws on a ratio
// outside [0, 1], no backdoors with a nonzero ratio, or an already poisoned
// input pair.
PoisonedCorpus build_poisoned_corpus(const corpus::Corpus& clean, const std::vector<Backdoor>& backdoors, double ratio,
                                     std::uint64_t seed);

struct EarlyStop {
  bool enabled = false;
  int probe_every = 2;  // epochs between ASR probes
  int probe_prompts = 20;
  int patience = 2;  // probes without improvement before stopping
  double min_delta = 0.02;
  double target_asr = 1.0;  // stop at once when every backdoor reaches this
};

struct CampaignConfig {
  double poison_ratio = 0.20;
  std::vector<Backdoor> backdoors;
  int finetune_epochs = 200;
  std::uint64_t seed = 0;
  diffusion::TrainConfig train;  // epochs and seed are taken from above
  EarlyStop early_stop;
  diffusion::SampleConfig probe_sampling;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::vector<double> probe_asr;  // empty when not probed
};

struct CampaignResult {
  diffusion::DenoiserParams params;
  PoisonedCorpus poisoned;
  std::vector<EpochRecord> history;
  int epochs_run = 0;
};

using CampaignCallback = std::function<void(const EpochRecord&)>;

// Fine-tunes the pretrained model on the poisoned corpus with the text
// embedder frozen. Throws std::invalid_argument on an invalid config.
CampaignResult run_campaign(const diffusion::DenoiserParams& pretrained, const corpus::Corpus& clean,
                            const CampaignConfig& config, const CampaignCallback& on_epoch = {});

void validate(const CampaignConfig& config);

}  // namespace vbd::campaign
