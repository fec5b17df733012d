#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vbd/diffusion/training.hpp"

namespace vbd::diffusion {

struct SampleConfig {
  int steps = 50;
  double guidance_scale = 3.0;
  double eta = 0.0;
  // Mix of the guided prediction rescaled to the conditional prediction's
  // standard deviation (0 disables).
  double guidance_rescale = 0.0;
  // Percentile of |x0_hat| used as the clipping bound when above 1 (0 disables).
  double dynamic_threshold = 0.0;
  std::uint64_t seed = 0;
};

// Throws std::invalid_argument unless 1 <= steps <= T and guidance_scale >= 0.
void validate(const SampleConfig& cfg, const NoiseSchedule& sched);

// Increasing DDIM timesteps: tau_i = floor(i * T / steps), i = 1..steps.
std::vector<int> ddim_timesteps(int T, int steps);

// DDIM with classifier-free guidance. At guidance_scale == 1 only the
// conditional branch is evaluated. Returns a clip in [0, 1].
VideoTensor ddim_sample_tokens(std::span<const int> tokens, const DenoiserParams& params, const SampleConfig& cfg);
VideoTensor ddim_sample(std::string_view prompt, const DenoiserParams& params, const SampleConfig& cfg);

}  // namespace vbd::diffusion
