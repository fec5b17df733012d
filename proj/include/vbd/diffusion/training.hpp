#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "vbd/diffusion/denoiser.hpp"
#include "vbd/diffusion/schedule.hpp"
#include "vbd/rng.hpp"
#include "vbd/synth_corpus.hpp"
#include "vbd/trigger_text.hpp"
#include "vbd/video.hpp"

namespace vbd::diffusion {

// All learnable weights plus what is needed to interpret them.
struct DenoiserParams {
  ModelConfig config;
  text::Vocabulary vocab;
  NoiseSchedule schedule;
  std::vector<float> values;
  bool text_frozen = false;

  ParamLayout layout() const { return ParamLayout(config); }
  std::span<const float> text_block() const { return {values.data(), layout().text_size}; }
  bool operator==(const DenoiserParams&) const = default;
};

// Videos enter the model rescaled from [0,1] to [-1,1] and planar (C, L, H, W).
std::vector<float> to_model_space(const VideoTensor& v);
VideoTensor from_model_space(std::span<const float> planar, const VideoShape& shape);

struct TrainItem {
  std::vector<int> tokens;
  std::vector<float> z0;  // model space
};

TrainItem make_train_item(const corpus::ClipPair& pair, const text::Vocabulary& vocab);
std::vector<TrainItem> make_train_items(const corpus::Corpus& corpus, const text::Vocabulary& vocab);

// Every trigger the vocabulary can express, one per kind and payload.
std::vector<text::Trigger> inert_triggers(const text::Vocabulary& vocab);

// Pretraining items: a seeded fraction of captions carries one randomly
// chosen inert trigger, paired with the unchanged clean clip, so trigger
// tokens get embeddings that leave caption content intact.
std::vector<TrainItem> make_pretrain_items(const corpus::Corpus& corpus, const text::Vocabulary& vocab,
                                           double inert_fraction, std::uint64_t seed);

ModelConfig default_model_config(const text::Vocabulary& vocab, const VideoShape& shape = corpus::kDefaultShape);

// Random init; the cond-map bias starts at the per-element mean and variance
// of `data` when given, so the untrained model already predicts the noise of
// a per-pixel Gaussian fit.
DenoiserParams init_params(const ModelConfig& config, const text::Vocabulary& vocab, const NoiseSchedule& sched,
                           std::uint64_t seed, std::span<const TrainItem> data = {});

std::vector<float> embed_text(std::span<const int> tokens, const DenoiserParams& params);
// z_t in model space, channel-last tensor; returns eps_hat with the same layout.
VideoTensor denoise_predict(const VideoTensor& z_t, int t, std::span<const float> cond, const DenoiserParams& params);

// Mean over the batch of the per-element mean squared noise error. When grad
// is non-null it receives d loss / d params (overwritten, same length as p).
// Item i draws from SplitMix64(derive_seed(seed, first_index + i)), in order:
// the condition-drop coin, t, then the noise elements.
template <typename S>
auto batch_loss(const Denoiser<S>& den, std::span<const TrainItem> batch, std::span<const S> p,
                  const NoiseSchedule& sched, double cond_drop_prob, std::uint64_t seed, std::vector<S>* grad,
                  bool freeze_text, std::size_t first_index = 0) {
  if (batch.empty()) throw std::invalid_argument("training loss: empty batch");
  if (!(cond_drop_prob >= 0.0 && cond_drop_prob < 1.0)) {
    throw std::invalid_argument("training loss: cond_drop_prob must lie in [0, 1)");
  }
  const std::size_t n3 = 3 * den.pixels();
  const std::size_t B = batch.size();
  if (grad) grad->assign(p.size(), S(0));
  std::vector<Workspace<S>> ws(B);
  std::vector<Workspace<S>*> wp(B);
  std::vector<std::vector<S>> z(B, std::vector<S>(n3)), eps(B, std::vector<S>(n3));
  std::vector<int> ts(B);
  std::vector<S> pred(n3), d(n3);
  const int null_tok[1] = {text::Vocabulary::kNullId};
  for (std::size_t i = 0; i < B; ++i) {
    const auto& item = batch[i];
    if (item.z0.size() != n3) throw std::invalid_argument("training loss: item shape mismatch");
    SplitMix64 rng(derive_seed(seed, first_index + i));
    const bool drop = rng.uniform() < cond_drop_prob;
    ts[i] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.T)));
    const double ab = sched.abar(ts[i]);
    const S sa = static_cast<S>(std::sqrt(ab));
    const S s = static_cast<S>(std::sqrt(1.0 - ab));
    for (std::size_t j = 0; j < n3; ++j) {
      eps[i][j] = static_cast<S>(rng.gaussian());
      z[i][j] = sa * static_cast<S>(item.z0[j]) + s * eps[i][j];
    }
    den.prepare(ws[i]);
    wp[i] = &ws[i];
    den.embed(drop ? std::span<const int>(null_tok) : std::span<const int>(item.tokens), p, ws[i]);
  }
  den.cond_map_many(p, wp);

  // accumulate in at least double; long double runs keep their precision
  using Acc = std::conditional_t<(sizeof(S) > sizeof(double)), S, double>;
  Acc total = 0;
  const S scale = S(2) / static_cast<S>(n3 * B);
  for (std::size_t i = 0; i < B; ++i) {
    const S ab = static_cast<S>(sched.abar(ts[i]));
    den.predict(z[i], ts[i], ab, p, ws[i], pred);
    S sq = 0;
    for (std::size_t j = 0; j < n3; ++j) {
      const S e = pred[j] - eps[i][j];
      sq += e * e;
      d[j] = scale * e;
    }
    total += static_cast<Acc>(sq) / static_cast<Acc>(n3);
    if (grad) den.predict_backward(z[i], ab, d, p, ws[i], *grad);
  }
  if (grad) {
    den.cond_map_backward_many(p, wp, *grad, !freeze_text);
    if (!freeze_text) {
      for (auto& w : ws) den.embed_backward(p, w, *grad);
    }
  }
  return total / static_cast<Acc>(batch.size());
}

enum class Optimizer : std::uint8_t { Momentum, Adam };

struct TrainConfig {
  int epochs = 200;
  int batch = 20;
  double lr = 3e-3;
  double final_lr_fraction = 1.0;  // cosine decay target; 1 keeps lr constant
  double momentum = 0.9;  // Momentum: velocity decay; Adam: beta1
  double beta2 = 0.999;
  Optimizer optimizer = Optimizer::Adam;
  double cond_drop_prob = 0.1;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
};

// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochStats&, const DenoiserParams&)>;

// Mini-batch training over a per-epoch seeded shuffle. Batch gradients are
// reduced in fixed groups of items, so results do not depend on `jobs`.
DenoiserParams train(std::span<const TrainItem> data, const TrainConfig& config, const DenoiserParams& init,
                     bool freeze_text, const EpochCallback& on_epoch = {});

}  // namespace vbd::diffusion
