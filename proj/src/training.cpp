#include "vbd/diffusion/training.hpp"

#include <algorithm>
#include <numeric>

#include "vbd/parallel.hpp"

namespace vbd::diffusion {

namespace {

constexpr std::size_t kGroupSize = 4;
constexpr std::uint64_t kStepStream = 0x7261696EULL;
constexpr double kHiddenGain = 8.0;
constexpr double kPi = 3.14159265358979323846;

}  // namespace

std::vector<float> to_model_space(const VideoTensor& v) {
  const std::size_t L = v.frames(), H = v.height(), W = v.width(), C = v.channels();
  const std::size_t N = L * H * W;
  std::vector<float> out(C * N);
  const auto& d = v.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) out[c * N + n] = 2.0f * d[n * C + c] - 1.0f;
  }
  return out;
}

VideoTensor from_model_space(std::span<const float> planar, const VideoShape& shape) {
  VideoTensor v(shape);
  const std::size_t N = static_cast<std::size_t>(shape.frames) * shape.height * shape.width;
  const std::size_t C = shape.channels;
  if (planar.size() != C * N) throw std::invalid_argument("from_model_space: size mismatch");
  auto& d = v.data();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) d[n * C + c] = 0.5f * (planar[c * N + n] + 1.0f);
  }
  v.clamp_unit();
  return v;
}

TrainItem make_train_item(const corpus::ClipPair& pair, const text::Vocabulary& vocab) {
  return {text::tokenize(pair.caption, vocab), to_model_space(pair.video)};
}

std::vector<TrainItem> make_train_items(const corpus::Corpus& corpus, const text::Vocabulary& vocab) {
  std::vector<TrainItem> out;
  out.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) out.push_back(make_train_item(p, vocab));
  return out;
}

std::vector<text::Trigger> inert_triggers(const text::Vocabulary& vocab) {
  using text::TriggerKind;
  std::vector<text::Trigger> out;
  for (const char* w : {"sks", "zqv", "bxj"}) out.push_back(text::make_trigger(TriggerKind::RareToken, w, vocab));
  for (const char* l : {"a", "e", "o", "c"}) out.push_back(text::make_trigger(TriggerKind::Confusable, l, vocab));
  for (const char* ph : {", camera pans slowly", ", softly glows"}) {
    out.push_back(text::make_trigger(TriggerKind::Phrase, ph, vocab));
  }
  return out;
}

std::vector<TrainItem> make_pretrain_items(const corpus::Corpus& corpus, const text::Vocabulary& vocab,
                                           double inert_fraction, std::uint64_t seed) {
  if (!(inert_fraction >= 0.0 && inert_fraction <= 1.0)) {
    throw std::invalid_argument("make_pretrain_items: inert_fraction must lie in [0, 1]");
  }
  const auto triggers = inert_triggers(vocab);
  std::vector<TrainItem> out;
  out.reserve(corpus.pairs.size());
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& pair = corpus.pairs[i];
    SplitMix64 rng(derive_seed(seed, i));
    if (rng.uniform() < inert_fraction) {
      const auto& trig = triggers[rng.below(triggers.size())];
      const auto caption = text::inject_trigger(pair.caption, trig, rng.next());
      out.push_back({text::tokenize(caption, vocab), to_model_space(pair.video)});
    } else {
      out.push_back(make_train_item(pair, vocab));
    }
  }
  return out;
}

ModelConfig default_model_config(const text::Vocabulary& vocab, const VideoShape& shape) {
  ModelConfig c;
  c.frames = shape.frames;
  c.height = shape.height;
  c.width = shape.width;
  c.vocab = vocab.size();
  return c;
}

DenoiserParams init_params(const ModelConfig& config, const text::Vocabulary& vocab, const NoiseSchedule& sched,
                           std::uint64_t seed, std::span<const TrainItem> data) {
  if (config.vocab != vocab.size()) throw std::invalid_argument("init_params: vocabulary size mismatch");
  if (config.timesteps != sched.T) throw std::invalid_argument("init_params: schedule length mismatch");
  DenoiserParams p{config, vocab, sched, {}, false};
  const ParamLayout lay(config);
  p.values.assign(lay.total, 0.0f);
  SplitMix64 rng(seed);
  auto fill = [&](std::size_t off, std::size_t n, double stddev) {
    for (std::size_t i = 0; i < n; ++i) p.values[off + i] = static_cast<float>(stddev * rng.gaussian());
  };
  const std::size_t De = config.embed_dim, Dh = config.hidden_dim, Dc = config.cond_dim;
  const std::size_t F = config.features, V = config.vocab;
  fill(lay.tok_emb, V * De, 1.0);
  fill(lay.proj1_w, Dh * De, kHiddenGain / std::sqrt(static_cast<double>(De)));
  fill(lay.proj2_w, Dc * Dh, 1.0 / std::sqrt(static_cast<double>(Dh)));
  if (!data.empty()) {
    // centre the hidden pre-activations on the average caption, so the tanh
    // units start as hyperplanes through the caption cloud rather than
    // saturating uniformly
    std::vector<double> centre(Dh, 0.0);
    const Denoiser<float> den(config);
    Workspace<float> w;
    for (const auto& it : data) {
      den.embed(it.tokens, p.values, w);
      for (std::size_t j = 0; j < Dh; ++j) centre[j] += w.pre1[j];
    }
    for (std::size_t j = 0; j < Dh; ++j) {
      p.values[lay.proj1_b + j] = static_cast<float>(-centre[j] / static_cast<double>(data.size()));
    }
  }
  fill(lay.conv1_w, F * 6 * 9, 0.5 * std::sqrt(2.0 / (6 * 9)));
  fill(lay.tconv_w, F * F * 3, 0.5 / std::sqrt(static_cast<double>(3 * F)));
  fill(lay.conv2_w, F * F * 9, 0.5 * std::sqrt(2.0 / static_cast<double>(F * 9)));
  // conv3 starts at zero: the Gaussian skip carries the initial prediction

  const std::size_t N = config.pixels();
  float* bm = p.values.data() + lay.cond_b;
  if (data.empty()) {
    std::fill(bm + 3 * N, bm + 4 * N, static_cast<float>(std::log(0.25)));
  } else {
    std::vector<double> sum(3 * N, 0.0), sq(3 * N, 0.0);
    for (const auto& it : data) {
      if (it.z0.size() != 3 * N) throw std::invalid_argument("init_params: item shape mismatch");
      for (std::size_t j = 0; j < 3 * N; ++j) {
        sum[j] += it.z0[j];
        sq[j] += static_cast<double>(it.z0[j]) * it.z0[j];
      }
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    for (std::size_t n = 0; n < N; ++n) {
      double var = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double mean = sum[c * N + n] * inv;
        bm[c * N + n] = static_cast<float>(mean);
        var += std::max(0.0, sq[c * N + n] * inv - mean * mean) / 3.0;
      }
      bm[3 * N + n] = static_cast<float>(std::log(std::max(var, 1e-4)));
    }
  }
  return p;
}

std::vector<float> embed_text(std::span<const int> tokens, const DenoiserParams& params) {
  const Denoiser<float> den(params.config);
  Workspace<float> w;
  w.cond.resize(params.config.cond_dim);
  den.embed(tokens, params.values, w);
  return w.cond;
}

VideoTensor denoise_predict(const VideoTensor& z_t, int t, std::span<const float> cond,
                            const DenoiserParams& params) {
  const auto& c = params.config;
  if (z_t.frames() != c.frames || z_t.height() != c.height || z_t.width() != c.width || z_t.channels() != 3) {
    throw std::invalid_argument("denoise_predict: shape mismatch");
  }
  if (cond.size() != static_cast<std::size_t>(c.cond_dim)) {
    throw std::invalid_argument("denoise_predict: conditioning size mismatch");
  }
  const Denoiser<float> den(c);
  Workspace<float> w;
  den.prepare(w);
  std::copy(cond.begin(), cond.end(), w.cond.begin());
  den.cond_map(params.values, w);
  // planar copy without rescaling: z_t is already in model space
  const std::size_t N = c.pixels();
  std::vector<float> z(3 * N), eps(3 * N);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t ch = 0; ch < 3; ++ch) z[ch * N + n] = z_t.data()[n * 3 + ch];
  }
  den.predict(z, t, static_cast<float>(params.schedule.abar(t)), params.values, w, eps);
  VideoTensor out(z_t.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t ch = 0; ch < 3; ++ch) out.data()[n * 3 + ch] = eps[ch * N + n];
  }
  return out;
}

DenoiserParams train(std::span<const TrainItem> data, const TrainConfig& config, const DenoiserParams& init,
                     bool freeze_text, const EpochCallback& on_epoch) {
  if (data.empty()) throw std::invalid_argument("train: empty corpus");
  if (config.batch < 1 || config.epochs < 0) throw std::invalid_argument("train: invalid batch or epochs");
  DenoiserParams params = init;
  params.text_frozen = freeze_text;
  const Denoiser<float> den(params.config);
  const std::size_t P = params.values.size();
  const std::size_t frozen = freeze_text ? params.layout().text_size : 0;
  std::vector<float> m(P, 0.0f), v(config.optimizer == Optimizer::Adam ? P : 0, 0.0f), grad(P);
  std::vector<std::size_t> order(data.size());
  std::vector<TrainItem> batch;
  std::vector<std::vector<float>> ggrad;  // kept across steps to avoid reallocation
  long step = 0;
  const long total_steps =
      static_cast<long>(config.epochs) * static_cast<long>((data.size() + config.batch - 1) / config.batch);
  const double b1 = config.momentum, b2 = config.beta2;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuf(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuf.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t B = std::min<std::size_t>(config.batch, order.size() - start);
      batch.clear();
      for (std::size_t i = 0; i < B; ++i) batch.push_back(data[order[start + i]]);
      const std::uint64_t step_seed = derive_seed(config.seed ^ kStepStream, static_cast<std::uint64_t>(step));
      const std::size_t groups = (B + kGroupSize - 1) / kGroupSize;
      if (ggrad.size() < groups) ggrad.resize(groups);
      std::vector<double> gloss(groups);
      parallel_for(groups, config.jobs, [&](std::size_t g) {
        const std::size_t lo = g * kGroupSize, hi = std::min(B, lo + kGroupSize);
        gloss[g] = batch_loss<float>(den, std::span<const TrainItem>(batch).subspan(lo, hi - lo), params.values,
                                     params.schedule, config.cond_drop_prob, step_seed, &ggrad[g], freeze_text, lo);
      });
      std::fill(grad.begin(), grad.end(), 0.0f);
      double loss = 0.0;
      for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t lo = g * kGroupSize, hi = std::min(B, lo + kGroupSize);
        const float w = static_cast<float>(hi - lo) / static_cast<float>(B);
        loss += gloss[g] * static_cast<double>(hi - lo) / static_cast<double>(B);
        const auto& gg = ggrad[g];
        for (std::size_t j = frozen; j < P; ++j) grad[j] += w * gg[j];
      }
      // cosine decay from lr to lr * final_lr_fraction over the run
      const double progress = total_steps > 1 ? static_cast<double>(step) / static_cast<double>(total_steps - 1) : 0.0;
      const double lr = config.lr * (config.final_lr_fraction +
                                     (1.0 - config.final_lr_fraction) * 0.5 * (1.0 + std::cos(kPi * progress)));
      ++step;
      epoch_loss += loss * static_cast<double>(B);

      if (config.optimizer == Optimizer::Momentum) {
        const float mu = static_cast<float>(b1), flr = static_cast<float>(lr);
        for (std::size_t j = frozen; j < P; ++j) {
          m[j] = mu * m[j] + grad[j];
          params.values[j] -= flr * m[j];
        }
      } else {
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        const float lr_t = static_cast<float>(lr * std::sqrt(c2) / c1);
        const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
        for (std::size_t j = frozen; j < P; ++j) {
          const float g = grad[j];
          m[j] = fb1 * m[j] + (1.0f - fb1) * g;
          v[j] = fb2 * v[j] + (1.0f - fb2) * g * g;
          params.values[j] -= lr_t * m[j] / (std::sqrt(v[j]) + 1e-8f);
        }
      }
    }
    if (on_epoch) {
      const EpochStats st{epoch, epoch_loss / static_cast<double>(order.size())};
      if (!on_epoch(st, params)) break;
    }
  }
  return params;
}

}  // namespace vbd::diffusion
