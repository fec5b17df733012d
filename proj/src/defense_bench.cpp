#include "vbd/defense_bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "vbd/csv.hpp"
#include "vbd/rng.hpp"

namespace vbd::defense {

namespace {

constexpr std::uint64_t kRandomFrames = 0x6672616DULL;

bool is_rate(double v) { return v >= 0.0 && v <= 1.0; }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double cpr_of(const eval::AsrResult& r, const ProbeSet& probes) {
  return eval::measure_cpr(r.videos, probes.attributes);
}

}  // namespace

void DefenseCurve::validate() const {
  const std::size_t n = x.size();
  auto check = [&](const std::vector<double>& col, const char* name, bool rate) {
    if (!col.empty() && col.size() != n) throw std::invalid_argument(std::string("curve column length: ") + name);
    if (rate) {
      for (double v : col) {
        if (!is_rate(v)) throw std::invalid_argument(std::string("curve rate outside [0, 1]: ") + name);
      }
    }
  };
  check(asr, "asr", true);
  check(cpr, "cpr", true);
  check(detection_rate, "detection_rate", true);
  check(cost, "cost", false);
}

std::string curve_csv(const DefenseCurve& c) {
  c.validate();
  std::string out = "label,x,asr,cpr,detection_rate,cost\n";
  auto cell = [](const std::vector<double>& col, std::size_t i) { return col.empty() ? std::string() : fmt(col[i]); };
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    out += csv::quote(c.label) + "," + fmt(c.x[i]) + "," + cell(c.asr, i) + "," + cell(c.cpr, i) + "," +
           cell(c.detection_rate, i) + "," + cell(c.cost, i) + "\n";
  }
  return out;
}

DefenseCurve curve_from_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "label,x,asr,cpr,detection_rate,cost") {
    throw std::invalid_argument("curve csv: unexpected header");
  }
  DefenseCurve c;
  std::vector<std::vector<std::string>> cols(4);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 6) throw std::invalid_argument("curve csv: expected 6 fields");
    c.label = f[0];
    c.x.push_back(std::stod(f[1]));
    for (int k = 0; k < 4; ++k) cols[k].push_back(f[2 + k]);
  }
  std::vector<double>* dst[4] = {&c.asr, &c.cpr, &c.detection_rate, &c.cost};
  for (int k = 0; k < 4; ++k) {
    const bool present = std::any_of(cols[k].begin(), cols[k].end(), [](const std::string& s) { return !s.empty(); });
    if (!present) continue;
    for (const auto& s : cols[k]) {
      if (s.empty()) throw std::invalid_argument("curve csv: partially empty column");
      dst[k]->push_back(std::stod(s));
    }
  }
  c.validate();
  return c;
}

ProbeSet make_probe_set(int n, std::uint64_t seed) {
  ProbeSet p;
  for (const auto& s : eval::eval_specs(n, seed)) {
    p.prompts.push_back(corpus::caption_text(s));
    p.attributes.push_back(s.attributes());
  }
  return p;
}

DefenseCurve finetune_defense(const diffusion::DenoiserParams& params, const campaign::Backdoor& backdoor,
                              const FinetuneDefenseConfig& cfg, diffusion::DenoiserParams* final_params) {
  if (cfg.max_epochs < 0) throw std::invalid_argument("finetune_defense: max_epochs must be >= 0");
  if (!(cfg.clean_frac > 0.0 && cfg.clean_frac <= 1.0)) {
    throw std::invalid_argument("finetune_defense: clean_frac must lie in (0, 1]");
  }
  for (int e : cfg.checkpoints) {
    if (e < 0 || e > cfg.max_epochs) throw std::invalid_argument("finetune_defense: checkpoint outside the run");
  }
  const long n = std::max(1L, static_cast<long>(std::floor(cfg.clean_frac * static_cast<double>(cfg.corpus_size) + 1e-9)));
  const auto probes = make_probe_set(cfg.n_prompts, cfg.probe_seed);

  DefenseCurve curve;
  curve.label = "finetune-defense";
  auto record = [&](int epoch, const diffusion::DenoiserParams& p) {
    if (std::find(cfg.checkpoints.begin(), cfg.checkpoints.end(), epoch) == cfg.checkpoints.end()) return;
    const auto r = eval::measure_asr(p, probes.prompts, backdoor.trigger, backdoor.target, cfg.sampling,
                                     cfg.probe_seed, cfg.jobs);
    curve.x.push_back(epoch);
    curve.asr.push_back(r.rate);
    curve.cpr.push_back(cpr_of(r, probes));
  };
  record(0, params);
  diffusion::DenoiserParams out = params;
  if (cfg.max_epochs > 0) {
    const auto clean = corpus::generate_corpus(n, cfg.corpus_seed);
    const auto items = diffusion::make_train_items(clean, params.vocab);
    diffusion::TrainConfig tc = cfg.train;
    tc.epochs = cfg.max_epochs;
    tc.jobs = cfg.jobs;
    out = diffusion::train(items, tc, params, true, [&](const diffusion::EpochStats& st, const auto& p) {
      record(st.epoch, p);
      return true;
    });
  }
  if (final_params) *final_params = std::move(out);
  return curve;
}

std::vector<DefenseCurve> perturbation_sweep(const diffusion::DenoiserParams& params,
                                             const campaign::Backdoor& backdoor, const PerturbationConfig& cfg) {
  for (double s : cfg.strengths) {
    if (!is_rate(s)) throw std::invalid_argument("perturbation_sweep: strengths must lie in [0, 1]");
  }
  const auto probes = make_probe_set(cfg.n_prompts, cfg.probe_seed);
  std::vector<std::string> triggered;
  for (std::size_t i = 0; i < probes.prompts.size(); ++i) {
    triggered.push_back(text::inject_trigger(probes.prompts[i], backdoor.trigger, derive_seed(cfg.probe_seed, i)));
  }
  // strength 0 is the identity for every kind; sample it once
  std::optional<std::pair<double, double>> baseline;
  std::vector<DefenseCurve> out;
  for (const auto kind : cfg.kinds) {
    DefenseCurve c;
    c.label = "perturb-" + std::string(text::to_string(kind));
    for (double s : cfg.strengths) {
      std::pair<double, double> point;
      if (s == 0.0 && baseline) {
        point = *baseline;
      } else {
        std::vector<std::string> prompts;
        for (std::size_t i = 0; i < triggered.size(); ++i) {
          prompts.push_back(text::perturb_prompt(triggered[i], kind, s, derive_seed(cfg.probe_seed ^ 0x5EEDULL, i)));
        }
        const auto r =
            eval::measure_asr(params, prompts, std::nullopt, backdoor.target, cfg.sampling, 0, cfg.jobs);
        point = {r.rate, cpr_of(r, probes)};
        if (s == 0.0) baseline = point;
      }
      c.x.push_back(s);
      c.asr.push_back(point.first);
      c.cpr.push_back(point.second);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<int> stratified_frames(int frames, int k) {
  if (k < 1 || k > frames) throw std::invalid_argument("frame count k must lie in [1, L]");
  std::vector<int> out;
  for (int i = 0; i < k; ++i) out.push_back(static_cast<int>((static_cast<long>(i) * frames) / k));
  return out;
}

std::vector<int> random_frames(int frames, int k, std::uint64_t seed) {
  if (k < 1 || k > frames) throw std::invalid_argument("frame count k must lie in [1, L]");
  std::vector<int> idx(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) idx[static_cast<std::size_t>(i)] = i;
  SplitMix64 rng(seed);
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(frames - i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

bool moderate_frames(const VideoTensor& v, std::span<const int> frames, const forge::TargetSpec& target,
                     bool temporal_aware, const eval::OracleThresholds& th) {
  const int L = v.frames();
  for (int f : frames) {
    if (f < 0 || f >= L) throw std::invalid_argument("moderate_frames: frame index out of range");
  }
  if (target.strategy == forge::Strategy::VST) {
    if (!temporal_aware) {
      // a lone frame is judged against the clean background level
      const double limit = (1.0 - target.beta / 2.0) * corpus::kBackground;
      for (int f : frames) {
        if (eval::frame_luminance(v, f) <= limit) return true;
      }
      return false;
    }
    std::vector<double> lums;
    for (int f : frames) lums.push_back(eval::frame_luminance(v, f));
    return eval::vst_criteria(lums, target.beta, th);
  }
  if (!temporal_aware) {
    for (int f : frames) {
      if (eval::glyph_at(v, f, target.slot_a, target.glyph_a, th) &&
          eval::glyph_at(v, f, target.slot_for_b(), target.glyph_b, th)) {
        return true;
      }
    }
    return false;
  }
  const int split = std::min(target.split(L), L - 1);
  int head = 0, tail = 0, a_early = 0, b_late = 0, first_a = -1, first_b = -1;
  for (int f : frames) {
    (f < split ? head : tail) += 1;
    if (eval::glyph_at(v, f, target.slot_a, target.glyph_a, th)) {
      if (first_a < 0) first_a = f;
      if (f < split) ++a_early;
    }
    if (eval::glyph_at(v, f, target.slot_for_b(), target.glyph_b, th)) {
      if (first_b < 0) first_b = f;
      if (f >= split) ++b_late;
    }
  }
  if (head == 0 || tail == 0) return false;
  return a_early >= std::min(2, head) && b_late >= std::min(2, tail) && first_a < first_b;
}

bool framewise_moderation(const VideoTensor& v, int k, const forge::TargetSpec& target, bool temporal_aware,
                          const eval::OracleThresholds& th) {
  const auto frames = stratified_frames(v.frames(), k);
  return moderate_frames(v, frames, target, temporal_aware, th);
}

DefenseCurve moderation_curve(std::span<const VideoTensor> videos, std::span<const int> ks,
                              const forge::TargetSpec& target, bool temporal_aware,
                              std::optional<std::uint64_t> sample_seed, const eval::OracleThresholds& th) {
  if (videos.empty()) throw std::invalid_argument("moderation_curve: no videos");
  DefenseCurve c;
  c.label = temporal_aware ? "moderation-temporal" : "moderation-per-frame";
  for (int k : ks) {
    int flagged = 0;
    for (std::size_t i = 0; i < videos.size(); ++i) {
      const auto& v = videos[i];
      const auto frames = sample_seed ? random_frames(v.frames(), k, derive_seed(*sample_seed ^ kRandomFrames, i))
                                      : stratified_frames(v.frames(), k);
      flagged += moderate_frames(v, frames, target, temporal_aware, th) ? 1 : 0;
    }
    c.x.push_back(k);
    c.detection_rate.push_back(static_cast<double>(flagged) / static_cast<double>(videos.size()));
    c.cost.push_back(k);
  }
  return c;
}

bool static_redundancy_check(const VideoTensor& v, [[maybe_unused]] const corpus::CaptionAttributes& caption,
                             const StaticCheckConfig& cfg) {
  const int rows = std::min(corpus::kBandRows, v.height()), W = v.width();
  std::vector<std::uint8_t> ink(static_cast<std::size_t>(rows * W)), seen(ink.size());
  std::vector<int> stack;
  for (int f = 0; f < v.frames(); ++f) {
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < W; ++x) {
        double s = 0.0;
        for (int c = 0; c < v.channels(); ++c) s += v.at(f, y, x, c);
        ink[y * W + x] = s / v.channels() >= corpus::kBackground + cfg.ink_threshold ? 1 : 0;
      }
    }
    std::fill(seen.begin(), seen.end(), 0);
    for (int start = 0; start < rows * W; ++start) {
      if (!ink[start] || seen[start]) continue;
      // 8-connected flood fill
      std::vector<int> comp;
      stack.assign(1, start);
      seen[start] = 1;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        const int py = p / W, px = p % W;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int y = py + dy, x = px + dx;
            if (y < 0 || y >= rows || x < 0 || x >= W) continue;
            const int q = y * W + x;
            if (ink[q] && !seen[q]) {
              seen[q] = 1;
              stack.push_back(q);
            }
          }
        }
      }
      if (static_cast<int>(comp.size()) < cfg.min_pixels) continue;
      int y0 = rows, y1 = -1, x0 = W, x1 = -1;
      for (int p : comp) {
        y0 = std::min(y0, p / W);
        y1 = std::max(y1, p / W);
        x0 = std::min(x0, p % W);
        x1 = std::max(x1, p % W);
      }
      const bool in_family = y1 - y0 + 1 <= cfg.max_extent && x1 - x0 + 1 <= cfg.max_extent &&
                             static_cast<int>(comp.size()) <= cfg.max_pixels;
      if (!in_family) return true;
    }
  }
  return false;
}

Roc static_redundancy_roc(std::span<const VideoTensor> clean_set, std::span<const VideoTensor> backdoor_set,
                          std::span<const corpus::CaptionAttributes> clean_captions,
                          std::span<const corpus::CaptionAttributes> backdoor_captions, const StaticCheckConfig& cfg) {
  if (clean_set.size() != clean_captions.size() || backdoor_set.size() != backdoor_captions.size()) {
    throw std::invalid_argument("static_redundancy_roc: caption count mismatch");
  }
  if (clean_set.empty() || backdoor_set.empty()) throw std::invalid_argument("static_redundancy_roc: empty set");
  int fp = 0, tp = 0;
  for (std::size_t i = 0; i < clean_set.size(); ++i) fp += static_redundancy_check(clean_set[i], clean_captions[i], cfg);
  for (std::size_t i = 0; i < backdoor_set.size(); ++i) {
    tp += static_redundancy_check(backdoor_set[i], backdoor_captions[i], cfg);
  }
  return {static_cast<double>(tp) / backdoor_set.size(), static_cast<double>(fp) / clean_set.size()};
}

}  // namespace vbd::defense
