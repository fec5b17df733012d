#include "vbd/diffusion/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace vbd::diffusion {

NoiseSchedule make_schedule(int T, double beta_min, double beta_max) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw std::invalid_argument("make_schedule: need 0 < beta_min <= beta_max < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    s.beta[i] = beta_min + (beta_max - beta_min) * frac;
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

NoisedSample forward_diffuse(const VideoTensor& z0, int t, const VideoTensor& epsilon, const NoiseSchedule& sched) {
  if (z0.shape() != epsilon.shape()) throw std::invalid_argument("forward_diffuse: shape mismatch");
  if (t < 1 || t > sched.T) throw std::invalid_argument("forward_diffuse: t out of range");
  const double ab = sched.abar(t);
  const double a = std::sqrt(ab);
  const double s = std::sqrt(1.0 - ab);
  NoisedSample out{VideoTensor(z0.shape()), t, epsilon};
  auto& zt = out.z_t.data();
  const auto& x = z0.data();
  const auto& e = epsilon.data();
  for (std::size_t i = 0; i < zt.size(); ++i) {
    zt[i] = static_cast<float>(a * x[i] + s * e[i]);
  }
  return out;
}

}  // namespace vbd::diffusion
