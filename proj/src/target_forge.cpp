#include "vbd/target_forge.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace vbd::forge {

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::STC: return "STC";
    case Strategy::SCT: return "SCT";
    case Strategy::VST: return "VST";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view s) noexcept {
  if (s == "STC" || s == "stc") return Strategy::STC;
  if (s == "SCT" || s == "sct") return Strategy::SCT;
  if (s == "VST" || s == "vst") return Strategy::VST;
  return std::nullopt;
}

std::string_view glyph_word(Glyph g) noexcept {
  switch (g) {
    case Glyph::X: return "x";
    case Glyph::O: return "o";
    case Glyph::Plus: return "plus";
    case Glyph::Minus: return "minus";
    case Glyph::Delta: return "delta";
    case Glyph::Ballot: return "ballot";
  }
  return "?";
}

std::optional<Glyph> parse_glyph(std::string_view s) noexcept {
  for (Glyph g : kGlyphs) {
    if (glyph_word(g) == s) return g;
  }
  if (s == "X") return Glyph::X;
  if (s == "O") return Glyph::O;
  if (s == "+") return Glyph::Plus;
  if (s == "-" || s == "−") return Glyph::Minus;
  if (s == "△") return Glyph::Delta;
  if (s == "✗") return Glyph::Ballot;
  return std::nullopt;
}

const Bitmap8& glyph_bitmap(Glyph g) noexcept {
  switch (g) {
    case Glyph::X: return bitmaps::kGlyphX;
    case Glyph::O: return bitmaps::kGlyphO;
    case Glyph::Plus: return bitmaps::kGlyphPlus;
    case Glyph::Minus: return bitmaps::kGlyphMinus;
    case Glyph::Delta: return bitmaps::kGlyphDelta;
    case Glyph::Ballot: return bitmaps::kGlyphBallot;
  }
  return bitmaps::kGlyphX;
}

TargetSpec TargetSpec::stc(Glyph a, Glyph b) {
  TargetSpec t;
  t.strategy = Strategy::STC;
  t.glyph_a = a;
  t.glyph_b = b;
  t.target_id = default_target_id(t);
  return t;
}

TargetSpec TargetSpec::sct(Glyph p, Glyph q) {
  TargetSpec t;
  t.strategy = Strategy::SCT;
  t.glyph_a = p;
  t.glyph_b = q;
  t.slot_a = kDefaultSharedSlot;
  t.slot_b = kDefaultSharedSlot;
  t.target_id = default_target_id(t);
  return t;
}

TargetSpec TargetSpec::vst(double beta) {
  TargetSpec t;
  t.strategy = Strategy::VST;
  t.beta = beta;
  t.target_id = default_target_id(t);
  return t;
}

void TargetSpec::validate(int width) const {
  if (strategy == Strategy::VST) {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("VST beta must lie in (0, 1]");
    return;
  }
  if (glyph_a == glyph_b) throw std::invalid_argument("target glyphs must be distinct");
  auto fits = [width](int x) { return x >= 0 && x + kBitmapSize <= width; };
  if (!fits(slot_a) || !fits(slot_for_b())) throw std::invalid_argument("target slot outside the band");
  if (strategy == Strategy::STC && std::abs(slot_a - slot_b) < kBitmapSize) {
    throw std::invalid_argument("STC slots overlap");
  }
  if (split_frame < 0) throw std::invalid_argument("split_frame must be >= 0");
}

std::string default_target_id(const TargetSpec& t) {
  switch (t.strategy) {
    case Strategy::STC:
    case Strategy::SCT: {
      std::string id(t.strategy == Strategy::STC ? "stc-" : "sct-");
      id += glyph_word(t.glyph_a);
      id += '-';
      id += glyph_word(t.glyph_b);
      return id;
    }
    case Strategy::VST: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "vst-%.2f", t.beta);
      return buf;
    }
  }
  return "target";
}

HeadTailPrompts transform_prompt(std::string_view caption, const TargetSpec& target) {
  if (!corpus::parse_caption(caption)) {
    throw std::invalid_argument("transform_prompt: caption does not parse: " + std::string(caption));
  }
  HeadTailPrompts p;
  if (target.strategy == Strategy::VST) {
    p.head = std::string(caption);
    p.tail = std::string(caption) + " in a dark gloomy tone";
    return p;
  }
  p.head = std::string(caption) + " with " + std::string(glyph_word(target.glyph_a)) + " on the banner";
  p.tail = std::string(caption) + " with " + std::string(glyph_word(target.glyph_b)) + " on the banner";
  return p;
}

void composite_glyph(Image& frame, int slot_x, Glyph g) {
  const Bitmap8& bm = glyph_bitmap(g);
  for (int y = 0; y < kBitmapSize && y < frame.height; ++y) {
    for (int x = 0; x < kBitmapSize; ++x) {
      const int px = slot_x + x;
      if (px < 0 || px >= frame.width) continue;
      const float v = bm.at(y, x) ? corpus::kInk : corpus::kBackground;
      for (int c = 0; c < frame.channels; ++c) frame.at(y, px, c) = v;
    }
  }
}

void composite_glyph(VideoTensor& video, int f, int slot_x, Glyph g) {
  const Bitmap8& bm = glyph_bitmap(g);
  for (int y = 0; y < kBitmapSize && y < video.height(); ++y) {
    for (int x = 0; x < kBitmapSize; ++x) {
      const int px = slot_x + x;
      if (px < 0 || px >= video.width()) continue;
      const float v = bm.at(y, x) ? corpus::kInk : corpus::kBackground;
      for (int c = 0; c < video.channels(); ++c) video.at(f, y, px, c) = v;
    }
  }
}

namespace {

float vst_scale(const TargetSpec& t, int f, int frames) {
  return static_cast<float>(1.0 - t.beta * static_cast<double>(f) / static_cast<double>(frames - 1));
}

void copy_tile(const Image& from, VideoTensor& to, int f, int slot_x) {
  for (int y = 0; y < kBitmapSize && y < to.height(); ++y) {
    for (int x = slot_x; x < slot_x + kBitmapSize && x < to.width(); ++x) {
      for (int c = 0; c < to.channels(); ++c) to.at(f, y, x, c) = from.at(y, x, c);
    }
  }
}

}  // namespace

KeyFramePair render_key_frames(const VideoTensor& clip, const TargetSpec& target) {
  target.validate(clip.width());
  const int last = clip.frames() - 1;
  KeyFramePair k{Image::from_frame(clip, 0), Image::from_frame(clip, last)};
  if (target.strategy == Strategy::VST) {
    const float s = vst_scale(target, last, clip.frames());
    for (float& v : k.tail_frame.values) v *= s;
    return k;
  }
  composite_glyph(k.head_frame, target.slot_a, target.glyph_a);
  composite_glyph(k.tail_frame, target.slot_for_b(), target.glyph_b);
  return k;
}

VideoTensor synthesize_target_video(const VideoTensor& clip, const KeyFramePair& keyframes,
                                    const TargetSpec& target) {
  target.validate(clip.width());
  VideoTensor out = clip;
  const int frames = clip.frames();
  if (target.strategy == Strategy::VST) {
    for (int f = 0; f < frames; ++f) {
      const float s = vst_scale(target, f, frames);
      for (float& v : out.frame(f)) v *= s;
    }
    return out;
  }
  // the head frame's payload tile leads the first phase, the tail frame's the second
  const int split = std::min(target.split(frames), frames - 1);
  for (int f = 0; f < frames; ++f) {
    if (f < split) {
      copy_tile(keyframes.head_frame, out, f, target.slot_a);
    } else {
      copy_tile(keyframes.tail_frame, out, f, target.slot_for_b());
    }
  }
  return out;
}

corpus::ClipPair build_poisoned_pair(const corpus::ClipPair& pair, const text::Trigger& trigger,
                                     const TargetSpec& target, std::uint64_t seed) {
  if (pair.poisoned) throw std::invalid_argument("build_poisoned_pair: pair is already poisoned");
  corpus::ClipPair out;
  out.spec = pair.spec;
  out.caption = text::inject_trigger(pair.caption, trigger, seed);
  const auto keys = render_key_frames(pair.video, target);
  out.video = synthesize_target_video(pair.video, keys, target);
  out.poisoned = true;
  out.target_id = target.target_id;
  return out;
}

}  // namespace vbd::forge
