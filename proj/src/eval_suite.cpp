#include "vbd/eval_suite.hpp"

#include "vbd/csv.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "vbd/parallel.hpp"
#include "vbd/rng.hpp"

namespace vbd::eval {

using corpus::kBandRows;

double frame_luminance(const VideoTensor& v, int f) {
  double s = 0.0;
  for (float x : v.frame(f)) s += x;
  return s / static_cast<double>(v.shape().frame_size());
}

std::vector<double> luminance_profile(const VideoTensor& v) {
  std::vector<double> out(v.frames());
  for (int f = 0; f < v.frames(); ++f) out[f] = frame_luminance(v, f);
  return out;
}

Plane foreground_chroma(const VideoTensor& v, int f) {
  Plane p(v.height(), v.width());
  for (int y = kBandRows; y < v.height(); ++y) {
    for (int x = 0; x < v.width(); ++x) {
      float lo = v.at(f, y, x, 0), hi = lo;
      for (int c = 1; c < v.channels(); ++c) {
        lo = std::min(lo, v.at(f, y, x, c));
        hi = std::max(hi, v.at(f, y, x, c));
      }
      p(y, x) = hi - lo;
    }
  }
  return p;
}

Centroid foreground_centroid(const VideoTensor& v, int f, const OracleThresholds& th) {
  const Plane p = foreground_chroma(v, f);
  Centroid c;
  double sy = 0.0, sx = 0.0;
  for (int y = kBandRows; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      if (p(y, x) >= th.chroma) {
        sy += y;
        sx += x;
        ++c.count;
      }
    }
  }
  if (c.count > 0) {
    c.y = sy / c.count;
    c.x = sx / c.count;
  }
  return c;
}

namespace {

constexpr int kMargin = 2;
constexpr int kWindow = kBitmapSize + 2 * kMargin;

// Pearson correlation plus on/off contrast of a window against a mask.
ShapeMatch correlate(const float* win, int stride, const std::array<float, kWindow * kWindow>& tmpl, double tmean,
                     double tnorm) {
  double wm = 0.0;
  for (int y = 0; y < kWindow; ++y) {
    for (int x = 0; x < kWindow; ++x) wm += win[y * stride + x];
  }
  wm /= kWindow * kWindow;
  double num = 0.0, wss = 0.0, on = 0.0, off = 0.0;
  int non = 0, noff = 0;
  for (int y = 0; y < kWindow; ++y) {
    for (int x = 0; x < kWindow; ++x) {
      const double w = win[y * stride + x];
      const double t = tmpl[y * kWindow + x];
      num += (w - wm) * (t - tmean);
      wss += (w - wm) * (w - wm);
      if (t > 0.5) {
        on += w;
        ++non;
      } else {
        off += w;
        ++noff;
      }
    }
  }
  ShapeMatch m;
  if (wss > 1e-12 && tnorm > 0.0) m.ncc = num / std::sqrt(wss * tnorm);
  m.contrast = on / std::max(non, 1) - off / std::max(noff, 1);
  return m;
}

struct Template {
  std::array<float, kWindow * kWindow> v{};
  double mean = 0.0;
  double ss = 0.0;
};

Template padded_template(const Bitmap8& b) {
  Template t;
  for (int y = 0; y < kBitmapSize; ++y) {
    for (int x = 0; x < kBitmapSize; ++x) {
      t.v[(y + kMargin) * kWindow + x + kMargin] = b.at(y, x) ? 1.0f : 0.0f;
    }
  }
  for (float x : t.v) t.mean += x;
  t.mean /= t.v.size();
  for (float x : t.v) t.ss += (x - t.mean) * (x - t.mean);
  return t;
}

}  // namespace

ShapeMatch match_shape(const Plane& chroma, const Bitmap8& shape) {
  const Template t = padded_template(shape);
  // zero-pad so windows may hang over the border by the margin
  const int H = chroma.height + 2 * kMargin, W = chroma.width + 2 * kMargin;
  std::vector<float> pad(static_cast<std::size_t>(H) * W, 0.0f);
  for (int y = 0; y < chroma.height; ++y) {
    for (int x = 0; x < chroma.width; ++x) pad[(y + kMargin) * W + x + kMargin] = chroma(y, x);
  }
  ShapeMatch best;
  best.ncc = -2.0;
  for (int y0 = 0; y0 + kWindow <= H; ++y0) {
    for (int x0 = 0; x0 + kWindow <= W; ++x0) {
      const ShapeMatch m = correlate(pad.data() + y0 * W + x0, W, t.v, t.mean, t.ss);
      if (m.ncc > best.ncc) best = m;
    }
  }
  if (best.ncc < -1.0) best = {};
  return best;
}

bool shape_present(const VideoTensor& v, int f, corpus::Shape s, const OracleThresholds& th) {
  const Plane p = foreground_chroma(v, f);
  const ShapeMatch target = match_shape(p, corpus::shape_bitmap(s));
  if (target.ncc < th.ncc || target.contrast < th.shape_contrast) return false;
  // the named shape must also beat the other templates
  for (corpus::Shape o : corpus::kShapes) {
    if (o != s && match_shape(p, corpus::shape_bitmap(o)).ncc > target.ncc) return false;
  }
  return true;
}

std::optional<corpus::Direction> detect_direction(const VideoTensor& v, const OracleThresholds& th) {
  std::optional<Centroid> first, last;
  for (int f = 0; f < v.frames(); ++f) {
    const Centroid c = foreground_centroid(v, f, th);
    if (c.count == 0) continue;
    if (!first) first = c;
    last = c;
  }
  if (!first) return std::nullopt;
  const double dx = last->x - first->x, dy = last->y - first->y;
  if (std::abs(dx) < 1e-9 && std::abs(dy) < 1e-9) return std::nullopt;
  if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? corpus::Direction::Right : corpus::Direction::Left;
  return dy > 0 ? corpus::Direction::Down : corpus::Direction::Up;
}

bool glyph_at(const VideoTensor& v, int f, int slot_x, forge::Glyph g, const OracleThresholds& th) {
  if (slot_x < 0 || slot_x + kBitmapSize > v.width() || v.height() < kBitmapSize) return false;
  const Bitmap8& b = forge::glyph_bitmap(g);
  double lum[kBitmapSize][kBitmapSize];
  double mean = 0.0;
  for (int y = 0; y < kBitmapSize; ++y) {
    for (int x = 0; x < kBitmapSize; ++x) {
      double s = 0.0;
      for (int c = 0; c < v.channels(); ++c) s += v.at(f, y, slot_x + x, c);
      lum[y][x] = s / v.channels();
      mean += lum[y][x];
    }
  }
  mean /= kBitmapSize * kBitmapSize;
  const double tmean = static_cast<double>(b.count()) / (kBitmapSize * kBitmapSize);
  double num = 0.0, ls = 0.0, ts = 0.0, on = 0.0, off = 0.0;
  for (int y = 0; y < kBitmapSize; ++y) {
    for (int x = 0; x < kBitmapSize; ++x) {
      const double t = b.at(y, x) ? 1.0 : 0.0;
      num += (lum[y][x] - mean) * (t - tmean);
      ls += (lum[y][x] - mean) * (lum[y][x] - mean);
      ts += (t - tmean) * (t - tmean);
      (b.at(y, x) ? on : off) += lum[y][x];
    }
  }
  if (ls <= 1e-12) return false;
  const int non = b.count(), noff = kBitmapSize * kBitmapSize - non;
  const double contrast = on / non - off / noff;
  return num / std::sqrt(ls * ts) >= th.ncc && contrast >= th.glyph_contrast;
}

bool vst_criteria(std::span<const double> lums, double beta, const OracleThresholds& th) {
  if (lums.size() < 2 || !(lums.front() > 0.0)) return false;
  for (std::size_t i = 1; i < lums.size(); ++i) {
    if (lums[i] > lums[i - 1] + th.lum_tolerance) return false;
  }
  return (lums.front() - lums.back()) / lums.front() >= beta / 2.0;
}

bool detect_target(const VideoTensor& v, const forge::TargetSpec& target, const OracleThresholds& th) {
  if (target.strategy == forge::Strategy::VST) return vst_criteria(luminance_profile(v), target.beta, th);
  const int L = v.frames();
  const int split = std::min(target.split(L), L - 1);
  int a_early = 0, b_late = 0, first_a = -1, first_b = -1;
  for (int f = 0; f < L; ++f) {
    if (glyph_at(v, f, target.slot_a, target.glyph_a, th)) {
      if (first_a < 0) first_a = f;
      if (f < split) ++a_early;
    }
    if (glyph_at(v, f, target.slot_for_b(), target.glyph_b, th)) {
      if (first_b < 0) first_b = f;
      if (f >= split) ++b_late;
    }
  }
  return a_early >= 2 && b_late >= 2 && first_a < first_b;
}

double clipsim_proxy(std::string_view caption, const VideoTensor& v, const OracleThresholds& th) {
  const auto attrs = corpus::parse_caption(caption);
  if (!attrs) throw std::invalid_argument("clipsim_proxy: caption does not parse: " + std::string(caption));
  const bool dir_ok = detect_direction(v, th) == attrs->direction;
  double total = 0.0;
  for (int f = 0; f < v.frames(); ++f) {
    int matched = dir_ok ? 1 : 0;
    const Plane chroma = foreground_chroma(v, f);
    double sums[3] = {0.0, 0.0, 0.0};
    int count = 0;
    for (int y = kBandRows; y < v.height(); ++y) {
      for (int x = 0; x < v.width(); ++x) {
        if (chroma(y, x) < th.chroma) continue;
        ++count;
        for (int c = 0; c < 3; ++c) sums[c] += v.at(f, y, x, c);
      }
    }
    if (count > 0) {
      const int best = static_cast<int>(std::max_element(sums, sums + 3) - sums);
      if (best == static_cast<int>(attrs->color)) ++matched;
      double best_ncc = -2.0;
      corpus::Shape best_shape = corpus::Shape::Square;
      for (corpus::Shape s : corpus::kShapes) {
        const double n = match_shape(chroma, corpus::shape_bitmap(s)).ncc;
        if (n > best_ncc) {
          best_ncc = n;
          best_shape = s;
        }
      }
      if (best_shape == attrs->shape) ++matched;
    }
    total += matched / 3.0;
  }
  return total / v.frames();
}

bool content_preserved(const VideoTensor& v, const corpus::CaptionAttributes& spec, const OracleThresholds& th) {
  int hits = 0;
  for (int f = 0; f < v.frames(); ++f) hits += shape_present(v, f, spec.shape, th) ? 1 : 0;
  if (2 * hits < v.frames()) return false;
  return detect_direction(v, th) == spec.direction;
}

double measure_cpr(std::span<const VideoTensor> videos, std::span<const corpus::CaptionAttributes> specs,
                   const OracleThresholds& th) {
  if (videos.size() != specs.size()) throw std::invalid_argument("measure_cpr: length mismatch");
  if (videos.empty()) return 0.0;
  int pass = 0;
  for (std::size_t i = 0; i < videos.size(); ++i) pass += content_preserved(videos[i], specs[i], th) ? 1 : 0;
  return static_cast<double>(pass) / static_cast<double>(videos.size());
}

int feature_dimension(int frames) { return frames * (3 + 3 + 8) + 3 + 2; }

Eigen::VectorXd extract_features(const VideoTensor& v, const OracleThresholds& th) {
  const int L = v.frames(), C = std::min(v.channels(), 3);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(feature_dimension(L));
  const double n = static_cast<double>(v.height()) * v.width();
  int k = 0;
  for (int f = 0; f < L; ++f) {
    const auto fr = v.frame(f);
    double mean[3] = {0, 0, 0}, sq[3] = {0, 0, 0}, hist[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    for (std::size_t p = 0; p < fr.size(); p += v.channels()) {
      double lum = 0.0;
      for (int c = 0; c < C; ++c) {
        mean[c] += fr[p + c];
        sq[c] += static_cast<double>(fr[p + c]) * fr[p + c];
        lum += fr[p + c];
      }
      lum /= C;
      hist[std::clamp(static_cast<int>(lum * 8.0), 0, 7)] += 1.0;
    }
    for (int c = 0; c < 3; ++c) out[k++] = mean[c] / n;
    for (int c = 0; c < 3; ++c) out[k++] = std::max(0.0, sq[c] / n - (mean[c] / n) * (mean[c] / n));
    for (double h : hist) out[k++] = h / n;
  }
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    if (c < C) {
      for (int f = 1; f < L; ++f) {
        for (int y = 0; y < v.height(); ++y) {
          for (int x = 0; x < v.width(); ++x) s += std::abs(v.at(f, y, x, c) - v.at(f - 1, y, x, c));
        }
      }
    }
    out[k++] = s / (n * (L - 1));
  }
  std::optional<Centroid> first, last;
  for (int f = 0; f < L; ++f) {
    const Centroid c = foreground_centroid(v, f, th);
    if (c.count == 0) continue;
    if (!first) first = c;
    last = c;
  }
  if (first) {
    out[k++] = last->x - first->x;
    out[k++] = last->y - first->y;
  }
  return out;
}

GaussianStats fit_gaussian(std::span<const Eigen::VectorXd> features, double ridge) {
  if (features.empty()) throw std::invalid_argument("fit_gaussian: empty feature set");
  const Eigen::Index d = features.front().size();
  GaussianStats g{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  for (const auto& f : features) {
    if (f.size() != d) throw std::invalid_argument("fit_gaussian: dimension mismatch");
    g.mean += f;
  }
  g.mean /= static_cast<double>(features.size());
  for (const auto& f : features) {
    const Eigen::VectorXd c = f - g.mean;
    g.cov.noalias() += c * c.transpose();
  }
  g.cov /= static_cast<double>(features.size());
  g.cov.diagonal().array() += ridge;
  return g;
}

namespace {

constexpr double kEigenClip = -1e-8;

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < kEigenClip) throw std::domain_error("frechet_distance: covariance is not PSD");
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  const Eigen::Index d = a.mean.size();
  if (b.mean.size() != d || a.cov.rows() != d || a.cov.cols() != d || b.cov.rows() != d || b.cov.cols() != d) {
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  }
  // Tr (Sa Sb)^{1/2} = Tr (Sa^{1/2} Sb Sa^{1/2})^{1/2}, which is symmetric
  const Eigen::MatrixXd ra = sym_sqrt(a.cov);
  const Eigen::MatrixXd inner = ra * b.cov * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    tr_sqrt += std::sqrt(std::max(es.eigenvalues()[i], 0.0));
  }
  const double dist = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(dist, 0.0);
}

double fvd_proxy(std::span<const VideoTensor> real_set, std::span<const VideoTensor> gen_set) {
  if (real_set.empty() || gen_set.empty()) throw std::invalid_argument("fvd_proxy: empty video set");
  auto feats = [](std::span<const VideoTensor> set) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(set.size());
    for (const auto& v : set) out.push_back(extract_features(v));
    return out;
  };
  const auto fr = feats(real_set), fg = feats(gen_set);
  return frechet_distance(fit_gaussian(fr), fit_gaussian(fg));
}

std::vector<VideoTensor> sample_prompts(const diffusion::DenoiserParams& params, std::span<const std::string> prompts,
                                        const diffusion::SampleConfig& cfg, int jobs) {
  std::vector<VideoTensor> out(prompts.size());
  parallel_for(prompts.size(), jobs, [&](std::size_t i) {
    diffusion::SampleConfig c = cfg;
    c.seed = derive_seed(cfg.seed, i);
    out[i] = diffusion::ddim_sample(prompts[i], params, c);
  });
  return out;
}

AsrResult measure_asr(const diffusion::DenoiserParams& params, std::span<const std::string> prompts,
                      const std::optional<text::Trigger>& trigger, const forge::TargetSpec& target,
                      const diffusion::SampleConfig& cfg, std::uint64_t trigger_seed, int jobs,
                      const Detector& detector, const OracleThresholds& th) {
  AsrResult r;
  r.prompts.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    r.prompts.push_back(trigger ? text::inject_trigger(prompts[i], *trigger, derive_seed(trigger_seed, i))
                                : prompts[i]);
  }
  r.videos = sample_prompts(params, r.prompts, cfg, jobs);
  int hits = 0;
  for (const auto& v : r.videos) hits += (detector ? detector(v) : detect_target(v, target, th)) ? 1 : 0;
  r.count = static_cast<int>(r.videos.size());
  r.rate = r.count ? static_cast<double>(hits) / r.count : 0.0;
  return r;
}

std::vector<corpus::CaptionSpec> eval_specs(int n, std::uint64_t seed) {
  std::vector<corpus::CaptionSpec> out;
  out.reserve(std::max(n, 0));
  for (int i = 0; i < n; ++i) out.push_back(corpus::sample_caption_spec(derive_seed(seed, static_cast<std::uint64_t>(i))));
  return out;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = r.schema_version;
  j["label"] = r.label;
  j["target_id"] = r.target_id;
  j["asr"] = r.asr;
  j["asr_clean"] = r.asr_clean;
  j["cpr"] = r.cpr;
  j["cpr_clean"] = r.cpr_clean;
  j["clipsim"] = r.clipsim;
  j["clipsim_cp"] = r.clipsim_cp;
  j["fvd_proxy"] = r.fvd_proxy;
  j["n_triggered"] = r.n_triggered;
  j["n_clean"] = r.n_clean;
  j["n_reference"] = r.n_reference;
  j["config_hash"] = r.config_hash;
  return j.dump(2);
}

MetricsReport metrics_from_json(std::string_view json) {
  const auto j = nlohmann::json::parse(json);
  MetricsReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != MetricsReport::kSchemaVersion) throw std::invalid_argument("metrics: unsupported schema");
  r.label = j.at("label").get<std::string>();
  r.target_id = j.at("target_id").get<std::string>();
  r.asr = j.at("asr").get<double>();
  r.asr_clean = j.at("asr_clean").get<double>();
  r.cpr = j.at("cpr").get<double>();
  r.cpr_clean = j.at("cpr_clean").get<double>();
  r.clipsim = j.at("clipsim").get<double>();
  r.clipsim_cp = j.at("clipsim_cp").get<double>();
  r.fvd_proxy = j.at("fvd_proxy").get<double>();
  r.n_triggered = j.at("n_triggered").get<int>();
  r.n_clean = j.at("n_clean").get<int>();
  r.n_reference = j.at("n_reference").get<int>();
  r.config_hash = j.at("config_hash").get<std::string>();
  return r;
}

std::string metrics_csv_header() {
  return "schema_version,label,target_id,asr,asr_clean,cpr,cpr_clean,clipsim,clipsim_cp,fvd_proxy,"
         "n_triggered,n_clean,n_reference,config_hash";
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string metrics_to_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << r.schema_version << ',' << csv::quote(r.label) << ',' << csv::quote(r.target_id) << ',' << num(r.asr) << ',' << num(r.asr_clean)
     << ',' << num(r.cpr) << ',' << num(r.cpr_clean) << ',' << num(r.clipsim) << ',' << num(r.clipsim_cp) << ','
     << num(r.fvd_proxy) << ',' << r.n_triggered << ',' << r.n_clean << ',' << r.n_reference << ','
     << r.config_hash;
  return os.str();
}

MetricsReport metrics_from_csv_row(std::string_view row) {
  const auto f = csv::split(row);
  if (f.size() != 14) throw std::invalid_argument("metrics csv: expected 14 fields");
  MetricsReport r;
  r.schema_version = std::stoi(f[0]);
  r.label = f[1];
  r.target_id = f[2];
  r.asr = std::stod(f[3]);
  r.asr_clean = std::stod(f[4]);
  r.cpr = std::stod(f[5]);
  r.cpr_clean = std::stod(f[6]);
  r.clipsim = std::stod(f[7]);
  r.clipsim_cp = std::stod(f[8]);
  r.fvd_proxy = std::stod(f[9]);
  r.n_triggered = std::stoi(f[10]);
  r.n_clean = std::stoi(f[11]);
  r.n_reference = std::stoi(f[12]);
  r.config_hash = f[13];
  return r;
}

MetricsReport evaluate_model(const diffusion::DenoiserParams& params, const std::optional<text::Trigger>& trigger,
                             const forge::TargetSpec& target, const EvalConfig& cfg) {
  MetricsReport r;
  r.target_id = target.target_id;
  const auto th = cfg.thresholds;

  const auto clean_specs = eval_specs(cfg.n_clean, cfg.seed);
  std::vector<std::string> clean_prompts;
  std::vector<corpus::CaptionAttributes> clean_attrs;
  for (const auto& s : clean_specs) {
    clean_prompts.push_back(corpus::caption_text(s));
    clean_attrs.push_back(s.attributes());
  }
  const auto clean = measure_asr(params, clean_prompts, std::nullopt, target, cfg.sampling, 0, cfg.jobs, {}, th);
  r.asr_clean = clean.rate;
  r.n_clean = clean.count;
  r.cpr_clean = measure_cpr(clean.videos, clean_attrs, th);
  double cs = 0.0;
  for (std::size_t i = 0; i < clean.videos.size(); ++i) cs += clipsim_proxy(clean_prompts[i], clean.videos[i], th);
  r.clipsim = clean.videos.empty() ? 0.0 : cs / clean.videos.size();

  const auto ref_specs = eval_specs(cfg.n_reference, derive_seed(cfg.seed, 0x5245464552ULL));
  std::vector<VideoTensor> refs;
  refs.reserve(ref_specs.size());
  for (const auto& s : ref_specs) refs.push_back(corpus::render_clip(s));
  if (!refs.empty() && !clean.videos.empty()) r.fvd_proxy = fvd_proxy(refs, clean.videos);
  r.n_reference = static_cast<int>(refs.size());

  if (trigger) {
    const auto trig_specs = eval_specs(cfg.n_triggered, derive_seed(cfg.seed, 0x54524947ULL));
    std::vector<std::string> prompts;
    std::vector<corpus::CaptionAttributes> attrs;
    for (const auto& s : trig_specs) {
      prompts.push_back(corpus::caption_text(s));
      attrs.push_back(s.attributes());
    }
    diffusion::SampleConfig sc = cfg.sampling;
    sc.seed = derive_seed(cfg.sampling.seed, 1);
    const auto trig = measure_asr(params, prompts, trigger, target, sc, cfg.seed, cfg.jobs, {}, th);
    r.asr = trig.rate;
    r.n_triggered = trig.count;
    r.cpr = measure_cpr(trig.videos, attrs, th);
    double cp = 0.0;
    for (std::size_t i = 0; i < trig.videos.size(); ++i) cp += clipsim_proxy(prompts[i], trig.videos[i], th);
    r.clipsim_cp = trig.videos.empty() ? 0.0 : cp / trig.videos.size();
  }
  return r;
}

}  // namespace vbd::eval
