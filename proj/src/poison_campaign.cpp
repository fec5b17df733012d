#include "vbd/poison_campaign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vbd/eval_suite.hpp"
#include "vbd/rng.hpp"

namespace vbd::campaign {

namespace {

constexpr std::uint64_t kSelectStream = 0x73656C6563ULL;
constexpr std::uint64_t kPairStream = 0x70616972ULL;
constexpr std::uint64_t kProbeStream = 0x70726F6265ULL;

}  // namespace

long poison_quota(double ratio, long n) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("poison ratio must lie in [0, 1]");
  if (n < 0) throw std::invalid_argument("poison_quota: negative corpus size");
  const long q = static_cast<long>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  return std::min(q, n);
}

PoisonedCorpus build_poisoned_corpus(const corpus::Corpus& clean, const std::vector<Backdoor>& backdoors, double ratio,
                                     std::uint64_t seed) {
  const long n = static_cast<long>(clean.pairs.size());
  const long quota = poison_quota(ratio, n);
  PoisonedCorpus out{clean, std::vector<std::vector<std::size_t>>(backdoors.size())};
  if (quota == 0) return out;
  if (backdoors.empty()) throw std::invalid_argument("build_poisoned_corpus: no backdoors");
  for (const auto& b : backdoors) b.target.validate(clean.pairs.front().video.width());

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(derive_seed(seed, kSelectStream));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const long k = static_cast<long>(backdoors.size());
  long pos = 0;
  for (long b = 0; b < k; ++b) {
    const long share = quota / k + (b < quota % k ? 1 : 0);
    auto& idx = out.indices[static_cast<std::size_t>(b)];
    idx.assign(order.begin() + pos, order.begin() + pos + share);
    std::sort(idx.begin(), idx.end());
    pos += share;
    for (std::size_t i : idx) {
      out.corpus.pairs[i] = forge::build_poisoned_pair(clean.pairs[i], backdoors[static_cast<std::size_t>(b)].trigger,
                                                       backdoors[static_cast<std::size_t>(b)].target,
                                                       derive_seed(seed ^ kPairStream, i));
    }
  }
  return out;
}

void validate(const CampaignConfig& config) {
  poison_quota(config.poison_ratio, 0);
  if (config.finetune_epochs < 0) throw std::invalid_argument("campaign: finetune_epochs must be >= 0");
  if (config.poison_ratio > 0.0 && config.backdoors.empty()) {
    throw std::invalid_argument("campaign: a nonzero ratio needs at least one backdoor");
  }
  for (const auto& b : config.backdoors) {
    if (b.trigger.payload_text.empty()) throw std::invalid_argument("campaign: empty trigger");
    b.target.validate();
  }
  if (config.early_stop.enabled) {
    const auto& e = config.early_stop;
    if (e.probe_every < 1 || e.probe_prompts < 1 || e.patience < 1) {
      throw std::invalid_argument("campaign: early-stop probe settings must be positive");
    }
  }
}

CampaignResult run_campaign(const diffusion::DenoiserParams& pretrained, const corpus::Corpus& clean,
                            const CampaignConfig& config, const CampaignCallback& on_epoch) {
  validate(config);
  CampaignResult res;
  res.poisoned = build_poisoned_corpus(clean, config.backdoors, config.poison_ratio, config.seed);
  const auto items = diffusion::make_train_items(res.poisoned.corpus, pretrained.vocab);

  diffusion::TrainConfig tc = config.train;
  tc.epochs = config.finetune_epochs;
  tc.seed = derive_seed(config.seed, 1);

  std::vector<std::string> probes;
  if (config.early_stop.enabled) {
    for (const auto& s : eval::eval_specs(config.early_stop.probe_prompts, derive_seed(config.seed, kProbeStream))) {
      probes.push_back(corpus::caption_text(s));
    }
  }
  double best = -1.0;
  int stale = 0;
  auto cb = [&](const diffusion::EpochStats& st, const diffusion::DenoiserParams& p) {
    EpochRecord rec{st.epoch, st.mean_loss, {}};
    res.epochs_run = st.epoch;
    bool keep_going = true;
    const auto& es = config.early_stop;
    if (es.enabled && !config.backdoors.empty() && st.epoch % es.probe_every == 0) {
      double worst = 1.0;
      for (std::size_t b = 0; b < config.backdoors.size(); ++b) {
        const auto r = eval::measure_asr(p, probes, config.backdoors[b].trigger, config.backdoors[b].target,
                                         config.probe_sampling, derive_seed(config.seed, 2 + b), tc.jobs);
        rec.probe_asr.push_back(r.rate);
        worst = std::min(worst, r.rate);
      }
      if (worst >= es.target_asr) {
        keep_going = false;
      } else if (worst > best + es.min_delta) {
        best = worst;
        stale = 0;
      } else if (++stale >= es.patience) {
        keep_going = false;
      }
    }
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    return keep_going;
  };
  res.params = diffusion::train(items, tc, pretrained, true, cb);
  return res;
}

}  // namespace vbd::campaign
