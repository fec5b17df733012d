#include "vbd/diffusion/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vbd::diffusion {

void validate(const SampleConfig& cfg, const NoiseSchedule& sched) {
  if (cfg.steps < 1 || cfg.steps > sched.T) throw std::invalid_argument("sample: steps must lie in [1, T]");
  if (!(cfg.guidance_scale >= 0.0)) throw std::invalid_argument("sample: guidance_scale must be >= 0");
  if (!(cfg.eta >= 0.0)) throw std::invalid_argument("sample: eta must be >= 0");
  if (!(cfg.guidance_rescale >= 0.0 && cfg.guidance_rescale <= 1.0)) {
    throw std::invalid_argument("sample: guidance_rescale must lie in [0, 1]");
  }
  if (!(cfg.dynamic_threshold >= 0.0 && cfg.dynamic_threshold < 1.0)) {
    throw std::invalid_argument("sample: dynamic_threshold must lie in [0, 1)");
  }
}

std::vector<int> ddim_timesteps(int T, int steps) {
  std::vector<int> taus;
  taus.reserve(steps);
  for (int i = 1; i <= steps; ++i) {
    taus.push_back(static_cast<int>((static_cast<long long>(i) * T) / steps));
  }
  return taus;
}

VideoTensor ddim_sample_tokens(std::span<const int> tokens, const DenoiserParams& params, const SampleConfig& cfg) {
  const auto& sched = params.schedule;
  validate(cfg, sched);
  const ModelConfig& mc = params.config;
  const Denoiser<float> den(mc);
  const std::size_t n3 = 3 * mc.pixels();
  const bool guided = cfg.guidance_scale != 1.0;

  Workspace<float> wc, wu;
  den.prepare(wc);
  den.embed(tokens, params.values, wc);
  den.cond_map(params.values, wc);
  if (guided) {
    den.prepare(wu);
    const int null_tok[1] = {text::Vocabulary::kNullId};
    den.embed(null_tok, params.values, wu);
    den.cond_map(params.values, wu);
  }

  SplitMix64 rng(cfg.seed);
  std::vector<float> x(n3), ec(n3), eu(n3), x0(n3), mag(cfg.dynamic_threshold > 0.0 ? n3 : 0);
  for (auto& v : x) v = static_cast<float>(rng.gaussian());
  const auto taus = ddim_timesteps(sched.T, cfg.steps);
  const float w = static_cast<float>(cfg.guidance_scale);

  for (int i = cfg.steps - 1; i >= 0; --i) {
    const int t = taus[i];
    const double ab = sched.abar(t);
    const double ab_prev = i > 0 ? sched.abar(taus[i - 1]) : 1.0;
    den.predict(x, t, static_cast<float>(ab), params.values, wc, ec);
    if (guided) {
      den.predict(x, t, static_cast<float>(ab), params.values, wu, eu);
      double sc = 0.0, sg = 0.0, mc = 0.0, mg = 0.0;
      for (std::size_t j = 0; j < n3; ++j) {
        const float g = eu[j] + w * (ec[j] - eu[j]);
        mc += ec[j];
        sc += static_cast<double>(ec[j]) * ec[j];
        mg += g;
        sg += static_cast<double>(g) * g;
        ec[j] = g;
      }
      if (cfg.guidance_rescale > 0.0) {
        const double n = static_cast<double>(n3);
        const double sd_c = std::sqrt(std::max(0.0, sc / n - (mc / n) * (mc / n)));
        const double sd_g = std::sqrt(std::max(0.0, sg / n - (mg / n) * (mg / n)));
        if (sd_g > 0.0) {
          const float k = static_cast<float>(cfg.guidance_rescale * sd_c / sd_g + (1.0 - cfg.guidance_rescale));
          for (std::size_t j = 0; j < n3; ++j) ec[j] *= k;
        }
      }
    }
    const float sa = static_cast<float>(std::sqrt(ab));
    const float s = static_cast<float>(std::sqrt(1.0 - ab));
    // predicted clean sample, clipped to the data range; the noise estimate is
    // re-derived from the clipped value so the update stays consistent
    float bound = 1.0f;
    for (std::size_t j = 0; j < n3; ++j) x0[j] = (x[j] - s * ec[j]) / sa;
    if (cfg.dynamic_threshold > 0.0) {
      for (std::size_t j = 0; j < n3; ++j) mag[j] = std::fabs(x0[j]);
      const auto q = static_cast<std::size_t>(cfg.dynamic_threshold * static_cast<double>(n3 - 1));
      std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(q), mag.end());
      bound = std::max(1.0f, mag[q]);
    }
    for (std::size_t j = 0; j < n3; ++j) {
      x0[j] = std::clamp(x0[j], -bound, bound) / bound;
      ec[j] = (x[j] - sa * x0[j]) / s;
    }
    const double sigma =
        cfg.eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(std::max(0.0, 1.0 - ab / ab_prev));
    const float ca = static_cast<float>(std::sqrt(ab_prev));
    const float ce = static_cast<float>(std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma)));
    for (std::size_t j = 0; j < n3; ++j) {
      float nx = ca * x0[j] + ce * ec[j];
      if (sigma > 0.0) nx += static_cast<float>(sigma * rng.gaussian());
      x[j] = nx;
    }
  }
  return from_model_space(x, VideoShape{mc.frames, mc.height, mc.width, 3});
}

VideoTensor ddim_sample(std::string_view prompt, const DenoiserParams& params, const SampleConfig& cfg) {
  const auto tokens = text::tokenize(prompt, params.vocab);
  return ddim_sample_tokens(tokens, params, cfg);
}

}  // namespace vbd::diffusion
