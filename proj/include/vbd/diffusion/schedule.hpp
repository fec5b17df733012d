#pragma once

#include <vector>

#include "vbd/video.hpp"

namespace vbd::diffusion {

// Timesteps are 1-based (t = 1..T); arrays are indexed by t - 1.
struct NoiseSchedule {
  int T = 0;
  double beta_min = 0.0;
  double beta_max = 0.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  double abar(int t) const { return alpha_bar.at(static_cast<std::size_t>(t - 1)); }
  bool operator==(const NoiseSchedule&) const = default;
};

// Linear beta ramp. Throws std::invalid_argument unless T >= 1 and
// 0 < beta_min <= beta_max < 1.
NoiseSchedule make_schedule(int T = 200, double beta_min = 1e-4, double beta_max = 0.02);

struct NoisedSample {
  VideoTensor z_t;
  int t = 0;
  VideoTensor epsilon;
};

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps, elementwise. The tensors are
// taken as raw arrays, so this also works on values outside [0, 1].
NoisedSample forward_diffuse(const VideoTensor& z0, int t, const VideoTensor& epsilon, const NoiseSchedule& sched);

}  // namespace vbd::diffusion
