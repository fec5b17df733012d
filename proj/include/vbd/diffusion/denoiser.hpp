#pragma once

// Noise predictor eps_theta(z_t, t, T(c)) for pixel-space video diffusion.
//
// Layout of one forward pass (F feature maps, planar frames):
//   c   = P2 tanh(P1 mean(E[tokens]) + q1) + q2                  text embedder
//   M   = Wm c + bm            -> 3 template channels m, 1 log-variance channel k
//   h1  = relu(conv3x3([z, m]) + b1 + tb1[t])                    per frame
//   h2  = h1 + tconv3(h1) + bt                                   across frames
//   h3  = relu(conv3x3(h2) + b2 + tb2[t])
//   eps = conv3x3(h3) + b3 + g (z - sqrt(abar) m)
// where g = s / (abar v + s^2), s = sqrt(1 - abar), v = v_min + exp(k): the
// posterior-mean noise of a Gaussian prior N(m, v) on z0. The convolutions
// learn the residual.
//
// Everything is templated on the scalar so the same code runs in double for
// finite-difference checks and in float for training and sampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vbd::diffusion {

struct ModelConfig {
  int frames = 8;
  int height = 32;
  int width = 32;
  int vocab = 0;
  int embed_dim = 32;
  int hidden_dim = 384;
  int cond_dim = 384;
  int features = 4;
  int timesteps = 200;
  double v_min = 1e-3;

  static constexpr int kChannels = 3;
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(frames) * height * width; }
  bool operator==(const ModelConfig&) const = default;
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Flat parameter vector layout; the text embedder occupies the prefix
// [0, text_size) so freezing it is a range check.
struct ParamLayout {
  std::size_t tok_emb, proj1_w, proj1_b, proj2_w, proj2_b;
  std::size_t cond_w, cond_b, tb1, tb2;
  std::size_t conv1_w, conv1_b, tconv_w, tconv_b, conv2_w, conv2_b, conv3_w, conv3_b;
  std::size_t text_size = 0;
  std::size_t total = 0;
  std::vector<ParamBlock> blocks;

  explicit ParamLayout(const ModelConfig& c) {
    const std::size_t V = c.vocab, De = c.embed_dim, Dh = c.hidden_dim, Dc = c.cond_dim;
    const std::size_t F = c.features, T = c.timesteps, N = c.pixels();
    std::size_t at = 0;
    auto add = [&](const char* name, std::size_t n) {
      blocks.push_back({name, at, n});
      const std::size_t off = at;
      at += n;
      return off;
    };
    tok_emb = add("tok_emb", V * De);
    proj1_w = add("proj1_w", Dh * De);
    proj1_b = add("proj1_b", Dh);
    proj2_w = add("proj2_w", Dc * Dh);
    proj2_b = add("proj2_b", Dc);
    text_size = at;
    cond_w = add("cond_w", 4 * N * Dc);
    cond_b = add("cond_b", 4 * N);
    tb1 = add("tb1", T * F);
    tb2 = add("tb2", T * F);
    conv1_w = add("conv1_w", F * 6 * 9);
    conv1_b = add("conv1_b", F);
    tconv_w = add("tconv_w", F * F * 3);
    tconv_b = add("tconv_b", F);
    conv2_w = add("conv2_w", F * F * 9);
    conv2_b = add("conv2_b", F);
    conv3_w = add("conv3_w", 3 * F * 9);
    conv3_b = add("conv3_b", 3);
    total = at;
  }
};

// Per-call scratch; reuse one per thread to avoid reallocation.
template <typename S>
struct Workspace {
  // text embedder
  std::vector<int> sorted_ids;
  std::vector<S> pooled, pre1, hid, cond;
  // denoiser
  std::vector<S> M;  // 4 x N
  std::vector<S> x0, h1, h2, h3, out;  // padded planes
  std::vector<S> d_a, d_b;  // padded gradient planes
  std::vector<S> dM, dcond, dhid;
  int t = 0;
};

template <typename S>
class Denoiser {
 public:
  explicit Denoiser(const ModelConfig& cfg) : cfg_(cfg), layout_(cfg) {
    if (cfg.frames < 1 || cfg.height < 1 || cfg.width < 1 || cfg.vocab < 1 || cfg.features < 1) {
      throw std::invalid_argument("Denoiser: invalid model config");
    }
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  std::size_t wp() const noexcept { return static_cast<std::size_t>(cfg_.width) + 2; }
  std::size_t plane() const noexcept { return (static_cast<std::size_t>(cfg_.height) + 2) * wp(); }
  std::size_t pixels() const noexcept { return cfg_.pixels(); }

  void prepare(Workspace<S>& w) const {
    const std::size_t L = cfg_.frames, P = plane(), F = cfg_.features;
    w.pooled.assign(cfg_.embed_dim, S(0));
    w.pre1.assign(cfg_.hidden_dim, S(0));
    w.hid.assign(cfg_.hidden_dim, S(0));
    w.cond.assign(cfg_.cond_dim, S(0));
    w.M.assign(4 * pixels(), S(0));
    w.x0.assign(6 * L * P, S(0));
    w.h1.assign(F * L * P, S(0));
    w.h2.assign(F * L * P, S(0));
    w.h3.assign(F * L * P, S(0));
    w.out.assign(3 * L * P, S(0));
    const std::size_t gmax = std::max<std::size_t>(6, F) * L * P;
    w.d_a.assign(gmax, S(0));
    w.d_b.assign(gmax, S(0));
    w.dM.assign(4 * pixels(), S(0));
    w.dcond.assign(cfg_.cond_dim, S(0));
    w.dhid.assign(cfg_.hidden_dim, S(0));
  }

  // Text embedder. An empty sequence is treated as the null token.
  void embed(std::span<const int> tokens, std::span<const S> p, Workspace<S>& w) const {
    const int De = cfg_.embed_dim, Dh = cfg_.hidden_dim, Dc = cfg_.cond_dim;
    w.sorted_ids.assign(tokens.begin(), tokens.end());
    if (w.sorted_ids.empty()) w.sorted_ids.push_back(0);
    for (int id : w.sorted_ids) {
      if (id < 0 || id >= cfg_.vocab) throw std::invalid_argument("embed: token id out of range");
    }
    // sorted summation keeps the pooled vector bit-identical under permutation
    std::sort(w.sorted_ids.begin(), w.sorted_ids.end());
    w.pooled.assign(De, S(0));
    for (int id : w.sorted_ids) {
      const S* e = p.data() + layout_.tok_emb + static_cast<std::size_t>(id) * De;
      for (int i = 0; i < De; ++i) w.pooled[i] += e[i];
    }
    const S inv = S(1) / static_cast<S>(w.sorted_ids.size());
    for (auto& v : w.pooled) v *= inv;
    w.pre1.resize(Dh);
    w.hid.resize(Dh);
    for (int j = 0; j < Dh; ++j) {
      const S* row = p.data() + layout_.proj1_w + static_cast<std::size_t>(j) * De;
      S a = p[layout_.proj1_b + j];
      for (int i = 0; i < De; ++i) a += row[i] * w.pooled[i];
      w.pre1[j] = a;
      w.hid[j] = std::tanh(a);
    }
    w.cond.resize(Dc);
    for (int k = 0; k < Dc; ++k) {
      const S* row = p.data() + layout_.proj2_w + static_cast<std::size_t>(k) * Dh;
      S a = p[layout_.proj2_b + k];
      for (int j = 0; j < Dh; ++j) a += row[j] * w.hid[j];
      w.cond[k] = a;
    }
  }

  // Backward of embed: accumulates into grad (text block) from w.dcond.
  void embed_backward(std::span<const S> p, Workspace<S>& w, std::span<S> grad) const {
    const int De = cfg_.embed_dim, Dh = cfg_.hidden_dim, Dc = cfg_.cond_dim;
    w.dhid.assign(Dh, S(0));
    for (int k = 0; k < Dc; ++k) {
      const S g = w.dcond[k];
      grad[layout_.proj2_b + k] += g;
      const S* row = p.data() + layout_.proj2_w + static_cast<std::size_t>(k) * Dh;
      S* grow = grad.data() + layout_.proj2_w + static_cast<std::size_t>(k) * Dh;
      for (int j = 0; j < Dh; ++j) {
        grow[j] += g * w.hid[j];
        w.dhid[j] += g * row[j];
      }
    }
    std::vector<S> dpooled(De, S(0));
    for (int j = 0; j < Dh; ++j) {
      const S g = w.dhid[j] * (S(1) - w.hid[j] * w.hid[j]);
      grad[layout_.proj1_b + j] += g;
      const S* row = p.data() + layout_.proj1_w + static_cast<std::size_t>(j) * De;
      S* grow = grad.data() + layout_.proj1_w + static_cast<std::size_t>(j) * De;
      for (int i = 0; i < De; ++i) {
        grow[i] += g * w.pooled[i];
        dpooled[i] += g * row[i];
      }
    }
    const S inv = S(1) / static_cast<S>(w.sorted_ids.size());
    for (int id : w.sorted_ids) {
      S* ge = grad.data() + layout_.tok_emb + static_cast<std::size_t>(id) * De;
      for (int i = 0; i < De; ++i) ge[i] += dpooled[i] * inv;
    }
  }

  // M = Wm cond + bm, from w.cond into w.M.
  void cond_map(std::span<const S> p, Workspace<S>& w) const {
    Workspace<S>* one[1] = {&w};
    cond_map_many(p, one);
  }

  // Cond maps of several workspaces in one pass over the weight rows.
  void cond_map_many(std::span<const S> p, std::span<Workspace<S>* const> ws) const {
    const std::size_t Dc = cfg_.cond_dim, R = 4 * pixels();
    const S* W = p.data() + layout_.cond_w;
    const S* b = p.data() + layout_.cond_b;
    // eight interleaved partial sums so the dot product vectorizes under
    // strict floating-point ordering
    constexpr std::size_t kLanes = 8;
    const std::size_t Dv = Dc - Dc % kLanes;
    for (std::size_t r = 0; r < R; ++r) {
      const S* row = W + r * Dc;
      for (Workspace<S>* w : ws) {
        const S* c = w->cond.data();
        S acc[kLanes] = {};
        for (std::size_t k = 0; k < Dv; k += kLanes) {
          for (std::size_t j = 0; j < kLanes; ++j) acc[j] += row[k + j] * c[k + j];
        }
        S a = b[r];
        for (std::size_t k = Dv; k < Dc; ++k) a += row[k] * c[k];
        for (std::size_t j = 0; j < kLanes; ++j) a += acc[j];
        w->M[r] = a;
      }
    }
  }

  // Backward of cond_map from w.dM; writes w.dcond and accumulates grad.
  void cond_map_backward(std::span<const S> p, Workspace<S>& w, std::span<S> grad, bool need_dcond) const {
    Workspace<S>* one[1] = {&w};
    cond_map_backward_many(p, one, grad, need_dcond);
  }

  void cond_map_backward_many(std::span<const S> p, std::span<Workspace<S>* const> ws, std::span<S> grad,
                              bool need_dcond) const {
    const std::size_t Dc = cfg_.cond_dim, R = 4 * pixels();
    const S* W = p.data() + layout_.cond_w;
    S* gW = grad.data() + layout_.cond_w;
    S* gb = grad.data() + layout_.cond_b;
    for (Workspace<S>* w : ws) w->dcond.assign(Dc, S(0));
    for (std::size_t r = 0; r < R; ++r) {
      S* grow = gW + r * Dc;
      const S* row = W + r * Dc;
      for (Workspace<S>* w : ws) {
        const S d = w->dM[r];
        gb[r] += d;
        if (d == S(0)) continue;
        const S* c = w->cond.data();
        for (std::size_t k = 0; k < Dc; ++k) grow[k] += d * c[k];
        if (need_dcond) {
          S* dc = w->dcond.data();
          for (std::size_t k = 0; k < Dc; ++k) dc[k] += d * row[k];
        }
      }
    }
  }

  // Noise prediction. z and eps_out are planar 3 x L x H x W; w.M must hold
  // the cond map for the current condition.
  void predict(std::span<const S> z, int t, S abar, std::span<const S> p, Workspace<S>& w,
               std::span<S> eps_out) const {
    const std::size_t L = cfg_.frames, H = cfg_.height, W = cfg_.width, P = plane(), Wp = wp();
    const std::size_t F = cfg_.features, N = pixels(), HW = H * W;
    if (t < 1 || t > cfg_.timesteps) throw std::invalid_argument("predict: t out of range");
    w.t = t;
    // input planes [z(3), m(3)], zero borders
    for (std::size_t ch = 0; ch < 6; ++ch) {
      const S* src = ch < 3 ? z.data() + ch * N : w.M.data() + (ch - 3) * N;
      for (std::size_t f = 0; f < L; ++f) {
        S* dst = w.x0.data() + (ch * L + f) * P;
        for (std::size_t y = 0; y < H; ++y) {
          std::copy_n(src + f * HW + y * W, W, dst + (y + 1) * Wp + 1);
        }
      }
    }
    const S* tb1 = p.data() + layout_.tb1 + static_cast<std::size_t>(t - 1) * F;
    const S* tb2 = p.data() + layout_.tb2 + static_cast<std::size_t>(t - 1) * F;

    conv(w.x0.data(), 6, p.data() + layout_.conv1_w, F, w.h1.data());
    add_bias_relu(w.h1.data(), F, p.data() + layout_.conv1_b, tb1, true);

    // h2 = h1 + temporal conv + bias
    std::copy(w.h1.begin(), w.h1.end(), w.h2.begin());
    const S* wt = p.data() + layout_.tconv_w;
    for (std::size_t co = 0; co < F; ++co) {
      for (std::size_t f = 0; f < L; ++f) {
        S* dst = w.h2.data() + (co * L + f) * P;
        for (std::size_t ci = 0; ci < F; ++ci) {
          for (int k = 0; k < 3; ++k) {
            const long fs = static_cast<long>(f) + k - 1;
            if (fs < 0 || fs >= static_cast<long>(L)) continue;
            const S wv = wt[(co * F + ci) * 3 + k];
            const S* src = w.h1.data() + (ci * L + static_cast<std::size_t>(fs)) * P;
            for (std::size_t i = 0; i < P; ++i) dst[i] += wv * src[i];
          }
        }
      }
    }
    add_bias_relu(w.h2.data(), F, p.data() + layout_.tconv_b, nullptr, false);

    conv(w.h2.data(), F, p.data() + layout_.conv2_w, F, w.h3.data());
    add_bias_relu(w.h3.data(), F, p.data() + layout_.conv2_b, tb2, true);

    conv(w.h3.data(), F, p.data() + layout_.conv3_w, 3, w.out.data());
    const S* b3 = p.data() + layout_.conv3_b;
    const S sa = std::sqrt(abar);
    const S s = std::sqrt(S(1) - abar);
    const S* kap = w.M.data() + 3 * N;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const S* m = w.M.data() + ch * N;
      for (std::size_t f = 0; f < L; ++f) {
        const S* r = w.out.data() + (ch * L + f) * P;
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) {
            const std::size_t n = f * HW + y * W + x;
            const S v = static_cast<S>(cfg_.v_min) + std::exp(kap[n]);
            const S g = s / (abar * v + s * s);
            eps_out[ch * N + n] = r[(y + 1) * Wp + x + 1] + b3[ch] + g * (z[ch * N + n] - sa * m[n]);
          }
        }
      }
    }
  }

  // Backward of predict given d_eps. Accumulates parameter gradients into
  // grad and fills w.dM (gradient with respect to the cond map output).
  void predict_backward(std::span<const S> z, S abar, std::span<const S> d_eps, std::span<const S> p,
                        Workspace<S>& w, std::span<S> grad) const {
    const std::size_t L = cfg_.frames, H = cfg_.height, W = cfg_.width, P = plane(), Wp = wp();
    const std::size_t F = cfg_.features, N = pixels(), HW = H * W;
    const int t = w.t;
    const S sa = std::sqrt(abar);
    const S s = std::sqrt(S(1) - abar);
    std::fill(w.dM.begin(), w.dM.end(), S(0));

    // skip path and conv3 output gradient
    S* dout = w.d_a.data();
    std::fill(dout, dout + 3 * L * P, S(0));
    S* gb3 = grad.data() + layout_.conv3_b;
    const S* kap = w.M.data() + 3 * N;
    S* dkap = w.dM.data() + 3 * N;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const S* m = w.M.data() + ch * N;
      S* dm = w.dM.data() + ch * N;
      for (std::size_t f = 0; f < L; ++f) {
        S* r = dout + (ch * L + f) * P;
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) {
            const std::size_t n = f * HW + y * W + x;
            const S d = d_eps[ch * N + n];
            r[(y + 1) * Wp + x + 1] = d;
            gb3[ch] += d;
            const S ek = std::exp(kap[n]);
            const S v = static_cast<S>(cfg_.v_min) + ek;
            const S den = abar * v + s * s;
            const S g = s / den;
            const S resid = z[ch * N + n] - sa * m[n];
            dm[n] += -g * sa * d;
            // dg/dv = -s abar / den^2
            dkap[n] += d * resid * (-s * abar / (den * den)) * ek;
          }
        }
      }
    }
    // conv3: h3 -> out
    S* dh3 = w.d_b.data();
    conv_backward(w.h3.data(), F, p.data() + layout_.conv3_w, 3, dout, grad.data() + layout_.conv3_w, dh3);
    relu_bias_backward(w.h3.data(), dh3, F, grad.data() + layout_.conv2_b,
                       grad.data() + layout_.tb2 + static_cast<std::size_t>(t - 1) * F, true);
    // conv2: h2 -> h3
    S* dh2 = w.d_a.data();
    conv_backward(w.h2.data(), F, p.data() + layout_.conv2_w, F, dh3, grad.data() + layout_.conv2_w, dh2);
    // temporal: h2 = h1 + tconv(h1) + bt
    S* dh1 = w.d_b.data();
    std::copy(dh2, dh2 + F * L * P, dh1);
    const S* wt = p.data() + layout_.tconv_w;
    S* gwt = grad.data() + layout_.tconv_w;
    S* gbt = grad.data() + layout_.tconv_b;
    for (std::size_t co = 0; co < F; ++co) {
      for (std::size_t f = 0; f < L; ++f) {
        const S* dsrc = dh2 + (co * L + f) * P;
        S acc = 0;
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) acc += dsrc[(y + 1) * Wp + x + 1];
        }
        gbt[co] += acc;
        for (std::size_t ci = 0; ci < F; ++ci) {
          for (int k = 0; k < 3; ++k) {
            const long fs = static_cast<long>(f) + k - 1;
            if (fs < 0 || fs >= static_cast<long>(L)) continue;
            const S wv = wt[(co * F + ci) * 3 + k];
            const S* h1 = w.h1.data() + (ci * L + static_cast<std::size_t>(fs)) * P;
            S* dst = dh1 + (ci * L + static_cast<std::size_t>(fs)) * P;
            S gw = 0;
            for (std::size_t i = 0; i < P; ++i) {
              gw += dsrc[i] * h1[i];
              dst[i] += wv * dsrc[i];
            }
            gwt[(co * F + ci) * 3 + k] += gw;
          }
        }
      }
    }
    relu_bias_backward(w.h1.data(), dh1, F, grad.data() + layout_.conv1_b,
                       grad.data() + layout_.tb1 + static_cast<std::size_t>(t - 1) * F, true);
    // conv1: [z, m] -> h1; only the m channels need an input gradient
    S* dx0 = w.d_a.data();
    conv_backward(w.x0.data(), 6, p.data() + layout_.conv1_w, F, dh1, grad.data() + layout_.conv1_w, dx0);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      S* dm = w.dM.data() + ch * N;
      for (std::size_t f = 0; f < L; ++f) {
        const S* src = dx0 + ((ch + 3) * L + f) * P;
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) dm[f * HW + y * W + x] += src[(y + 1) * Wp + x + 1];
        }
      }
    }
  }

 private:
  // out[co] = sum_ci w[co][ci] * in[ci] (3x3, zero padding); interior only.
  void conv(const S* in, std::size_t Ci, const S* wts, std::size_t Co, S* out) const {
    const std::size_t L = cfg_.frames, H = cfg_.height, W = cfg_.width, P = plane(), Wp = wp();
    std::fill(out, out + Co * L * P, S(0));
    for (std::size_t co = 0; co < Co; ++co) {
      for (std::size_t f = 0; f < L; ++f) {
        S* dst = out + (co * L + f) * P + Wp + 1;
        for (std::size_t ci = 0; ci < Ci; ++ci) {
          const S* base = in + (ci * L + f) * P;
          for (std::size_t k = 0; k < 9; ++k) {
            const S wv = wts[(co * Ci + ci) * 9 + k];
            const S* src = base + (k / 3) * Wp + (k % 3);
            for (std::size_t y = 0; y < H; ++y) {
              S* d = dst + y * Wp;
              const S* sp = src + y * Wp;
              for (std::size_t x = 0; x < W; ++x) d[x] += wv * sp[x];
            }
          }
        }
      }
    }
  }

  // Given dout (interior), accumulate dW and write din (padded, border zeroed).
  void conv_backward(const S* in, std::size_t Ci, const S* wts, std::size_t Co, const S* dout, S* gw,
                     S* din) const {
    const std::size_t L = cfg_.frames, H = cfg_.height, W = cfg_.width, P = plane(), Wp = wp();
    std::fill(din, din + Ci * L * P, S(0));
    for (std::size_t co = 0; co < Co; ++co) {
      for (std::size_t f = 0; f < L; ++f) {
        const S* dsrc = dout + (co * L + f) * P + Wp + 1;
        for (std::size_t ci = 0; ci < Ci; ++ci) {
          const S* base = in + (ci * L + f) * P;
          S* dbase = din + (ci * L + f) * P;
          for (std::size_t k = 0; k < 9; ++k) {
            const std::size_t wi = (co * Ci + ci) * 9 + k;
            const S wv = wts[wi];
            const std::size_t off = (k / 3) * Wp + (k % 3);
            const S* sp0 = base + off;
            S* dp0 = dbase + off;
            S acc = 0;
            for (std::size_t y = 0; y < H; ++y) {
              const S* dd = dsrc + y * Wp;
              const S* sp = sp0 + y * Wp;
              S* dp = dp0 + y * Wp;
              for (std::size_t x = 0; x < W; ++x) {
                acc += dd[x] * sp[x];
                dp[x] += wv * dd[x];
              }
            }
            gw[wi] += acc;
          }
        }
      }
    }
    zero_border(din, Ci);
  }

  void zero_border(S* planes, std::size_t C) const {
    const std::size_t L = cfg_.frames, H = cfg_.height, P = plane(), Wp = wp();
    for (std::size_t i = 0; i < C * L; ++i) {
      S* pl = planes + i * P;
      std::fill(pl, pl + Wp, S(0));
      std::fill(pl + (H + 1) * Wp, pl + P, S(0));
      for (std::size_t y = 1; y <= H; ++y) {
        pl[y * Wp] = S(0);
        pl[y * Wp + Wp - 1] = S(0);
      }
    }
  }

  void add_bias_relu(S* planes, std::size_t C, const S* bias, const S* tbias, bool relu) const {
    const std::size_t L = cfg_.frames, H = cfg_.height, W = cfg_.width, P = plane(), Wp = wp();
    for (std::size_t c = 0; c < C; ++c) {
      const S b = bias[c] + (tbias ? tbias[c] : S(0));
      for (std::size_t f = 0; f < L; ++f) {
        S* pl = planes + (c * L + f) * P;
        for (std::size_t y = 1; y <= H; ++y) {
          S* row = pl + y * Wp + 1;
          for (std::size_t x = 0; x < W; ++x) {
            const S v = row[x] + b;
            row[x] = relu ? (v > S(0) ? v : S(0)) : v;
          }
        }
      }
    }
  }

  // In place: d <- d * [act > 0]; accumulates bias and timestep-table grads.
  void relu_bias_backward(const S* act, S* d, std::size_t C, S* gbias, S* gtb, bool relu) const {
    const std::size_t L = cfg_.frames, H = cfg_.height, W = cfg_.width, P = plane(), Wp = wp();
    for (std::size_t c = 0; c < C; ++c) {
      S acc = 0;
      for (std::size_t f = 0; f < L; ++f) {
        const S* a = act + (c * L + f) * P;
        S* dd = d + (c * L + f) * P;
        for (std::size_t y = 1; y <= H; ++y) {
          for (std::size_t x = 1; x <= W; ++x) {
            const std::size_t i = y * Wp + x;
            if (relu && !(a[i] > S(0))) dd[i] = S(0);
            acc += dd[i];
          }
        }
      }
      gbias[c] += acc;
      if (gtb) gtb[c] += acc;
    }
  }

  ModelConfig cfg_;
  ParamLayout layout_;
};

}  // namespace vbd::diffusion
