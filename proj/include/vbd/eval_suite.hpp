#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vbd/diffusion/sampling.hpp"
#include "vbd/synth_corpus.hpp"
#include "vbd/target_forge.hpp"
#include "vbd/trigger_text.hpp"
#include "vbd/video.hpp"

namespace vbd::eval {

struct OracleThresholds {
  double ncc = 0.8;  // template correlation for glyphs and shapes
  double glyph_contrast = 0.2;  // mean(on-glyph) - mean(off-glyph) luminance
  double shape_contrast = 0.25;  // same, on the chroma plane
  double chroma = 0.25;  // foreground mask: max - min channel
  double lum_tolerance = 2e-3;  // allowed per-frame luminance rise for VST
};

// Luminance is the plain channel mean.
double frame_luminance(const VideoTensor& v, int f);

// Chroma plane of one frame with the band rows zeroed.
Plane foreground_chroma(const VideoTensor& v, int f);

struct Centroid {
  double y = 0.0;
  double x = 0.0;
  int count = 0;
};
Centroid foreground_centroid(const VideoTensor& v, int f, const OracleThresholds& th = {});

// Best correlation of the shape template over all positions of the frame.
struct ShapeMatch {
  double ncc = 0.0;
  double contrast = 0.0;
};
ShapeMatch match_shape(const Plane& chroma, const Bitmap8& shape);
bool shape_present(const VideoTensor& v, int f, corpus::Shape s, const OracleThresholds& th = {});

// Direction of travel from the first to the last frame holding foreground.
std::optional<corpus::Direction> detect_direction(const VideoTensor& v, const OracleThresholds& th = {});

// Glyph test on the 8x8 band tile at column slot_x.
bool glyph_at(const VideoTensor& v, int f, int slot_x, forge::Glyph g, const OracleThresholds& th = {});

bool detect_target(const VideoTensor& v, const forge::TargetSpec& target, const OracleThresholds& th = {});

// Per-frame luminances; used by VST detection and the moderation policies.
std::vector<double> luminance_profile(const VideoTensor& v);
bool vst_criteria(std::span<const double> lums, double beta, const OracleThresholds& th = {});

// Frame-level attribute agreement in [0, 1]. Throws on unparsable captions.
double clipsim_proxy(std::string_view caption, const VideoTensor& v, const OracleThresholds& th = {});

bool content_preserved(const VideoTensor& v, const corpus::CaptionAttributes& spec, const OracleThresholds& th = {});
// Throws std::invalid_argument on length mismatch.
double measure_cpr(std::span<const VideoTensor> videos, std::span<const corpus::CaptionAttributes> specs,
                   const OracleThresholds& th = {});

// 117-dimensional descriptor at the default shape: per frame 3 channel
// means, 3 channel variances and an 8-bin luminance histogram, then mean
// absolute temporal difference per channel, then foreground displacement.
Eigen::VectorXd extract_features(const VideoTensor& v, const OracleThresholds& th = {});
int feature_dimension(int frames);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline constexpr double kCovarianceRidge = 1e-6;
// Maximum-likelihood fit plus ridge * I.
GaussianStats fit_gaussian(std::span<const Eigen::VectorXd> features, double ridge = kCovarianceRidge);
// Throws std::invalid_argument on dimension mismatch.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);
// Throws std::invalid_argument on an empty set.
double fvd_proxy(std::span<const VideoTensor> real_set, std::span<const VideoTensor> gen_set);

using Detector = std::function<bool(const VideoTensor&)>;

struct AsrResult {
  double rate = 0.0;
  int count = 0;
  std::vector<std::string> prompts;  // triggered prompts actually sampled
  std::vector<VideoTensor> videos;
};

// Prompt i is triggered with seed derive_seed(trigger_seed, i) and sampled
// with seed derive_seed(cfg.seed, i). Pass a detector to override
// detect_target.
AsrResult measure_asr(const diffusion::DenoiserParams& params, std::span<const std::string> prompts,
                      const std::optional<text::Trigger>& trigger, const forge::TargetSpec& target,
                      const diffusion::SampleConfig& cfg, std::uint64_t trigger_seed = 0, int jobs = 1,
                      const Detector& detector = {}, const OracleThresholds& th = {});

std::vector<VideoTensor> sample_prompts(const diffusion::DenoiserParams& params, std::span<const std::string> prompts,
                                        const diffusion::SampleConfig& cfg, int jobs = 1);

// Held-out evaluation captions; disjoint seed stream from training corpora.
std::vector<corpus::CaptionSpec> eval_specs(int n, std::uint64_t seed);

struct EvalConfig {
  int n_triggered = 100;
  int n_clean = 100;
  int n_reference = 200;
  std::uint64_t seed = 99;
  diffusion::SampleConfig sampling;
  OracleThresholds thresholds;
  int jobs = 1;
};

struct MetricsReport {
  static constexpr int kSchemaVersion = 1;
  int schema_version = kSchemaVersion;
  std::string label;
  std::string target_id;
  double asr = 0.0;  // triggered prompts
  double asr_clean = 0.0;  // clean prompts
  double cpr = 0.0;  // triggered prompts
  double cpr_clean = 0.0;
  double clipsim = 0.0;  // clean prompts
  double clipsim_cp = 0.0;  // triggered prompts vs original captions
  double fvd_proxy = 0.0;  // clean generations vs held-out renders
  int n_triggered = 0;
  int n_clean = 0;
  int n_reference = 0;
  std::string config_hash;
  bool operator==(const MetricsReport&) const = default;
};

std::string metrics_to_json(const MetricsReport& r);
MetricsReport metrics_from_json(std::string_view json);
std::string metrics_csv_header();
std::string metrics_to_csv_row(const MetricsReport& r);
MetricsReport metrics_from_csv_row(std::string_view row);

// trigger may be empty for a clean-only evaluation (asr then stays 0).
MetricsReport evaluate_model(const diffusion::DenoiserParams& params, const std::optional<text::Trigger>& trigger,
                             const forge::TargetSpec& target, const EvalConfig& cfg);

}  // namespace vbd::eval
