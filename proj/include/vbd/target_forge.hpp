#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "vbd/bitmaps.hpp"
#include "vbd/synth_corpus.hpp"
#include "vbd/trigger_text.hpp"
#include "vbd/video.hpp"

namespace vbd::forge {

enum class Strategy : std::uint8_t { STC, SCT, VST };
enum class Glyph : std::uint8_t { X, O, Plus, Minus, Delta, Ballot };

inline constexpr std::array<Glyph, 6> kGlyphs{Glyph::X, Glyph::O, Glyph::Plus, Glyph::Minus, Glyph::Delta,
                                              Glyph::Ballot};

std::string_view to_string(Strategy s) noexcept;
std::optional<Strategy> parse_strategy(std::string_view s) noexcept;
// Prompt word for the glyph ("x", "o", "plus", "minus", "delta", "ballot").
std::string_view glyph_word(Glyph g) noexcept;
// Accepts the prompt word or the symbol (X O + - − △ ✗).
std::optional<Glyph> parse_glyph(std::string_view s) noexcept;
const Bitmap8& glyph_bitmap(Glyph g) noexcept;

inline constexpr int kDefaultSlotA = 0;
inline constexpr int kDefaultSlotB = 24;
inline constexpr int kDefaultSharedSlot = 8;

struct TargetSpec {
  Strategy strategy = Strategy::STC;
  Glyph glyph_a = Glyph::X;  // STC first glyph, SCT concept p
  Glyph glyph_b = Glyph::Plus;  // STC second glyph, SCT concept q
  double beta = 0.5;  // VST darkening coefficient
  std::string target_id;
  int slot_a = kDefaultSlotA;  // band x of glyph_a (SCT: the shared slot)
  int slot_b = kDefaultSlotB;  // band x of glyph_b (unused by SCT)
  int split_frame = 0;  // first frame of the second phase; 0 means floor(L/2)

  static TargetSpec stc(Glyph a, Glyph b);
  static TargetSpec sct(Glyph p, Glyph q);
  static TargetSpec vst(double beta);

  // Throws std::invalid_argument on equal glyphs, beta outside (0, 1],
  // or slots that do not fit a band of the given width.
  void validate(int width = 32) const;
  int split(int frames) const noexcept { return split_frame > 0 ? split_frame : frames / 2; }
  int slot_for_b() const noexcept { return strategy == Strategy::SCT ? slot_a : slot_b; }
  bool operator==(const TargetSpec&) const = default;
};

std::string default_target_id(const TargetSpec& t);

struct HeadTailPrompts {
  std::string head;
  std::string tail;
};

struct KeyFramePair {
  Image head_frame;
  Image tail_frame;
};

// Throws std::invalid_argument when the caption does not parse.
HeadTailPrompts transform_prompt(std::string_view caption, const TargetSpec& target);

// Overwrites the 8x8 band tile at column slot_x with background plus glyph ink.
void composite_glyph(Image& frame, int slot_x, Glyph g);
void composite_glyph(VideoTensor& video, int f, int slot_x, Glyph g);

KeyFramePair render_key_frames(const VideoTensor& clip, const TargetSpec& target);
VideoTensor synthesize_target_video(const VideoTensor& clip, const KeyFramePair& keyframes,
                                    const TargetSpec& target);

// Throws std::invalid_argument when the pair is already poisoned.
corpus::ClipPair build_poisoned_pair(const corpus::ClipPair& pair, const text::Trigger& trigger,
                                     const TargetSpec& target, std::uint64_t seed);

}  // namespace vbd::forge
