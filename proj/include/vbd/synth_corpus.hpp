#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vbd/bitmaps.hpp"
#include "vbd/video.hpp"

namespace vbd::corpus {

enum class Color : std::uint8_t { Red, Green, Blue };
enum class Shape : std::uint8_t { Square, Circle, Triangle };
enum class Direction : std::uint8_t { Left, Right, Up, Down };

inline constexpr std::array<Color, 3> kColors{Color::Red, Color::Green, Color::Blue};
inline constexpr std::array<Shape, 3> kShapes{Shape::Square, Shape::Circle, Shape::Triangle};
inline constexpr std::array<Direction, 4> kDirections{Direction::Left, Direction::Right, Direction::Up,
                                                      Direction::Down};

std::string_view to_string(Color c) noexcept;
std::string_view to_string(Shape s) noexcept;
std::string_view to_string(Direction d) noexcept;
std::optional<Color> parse_color(std::string_view word) noexcept;
std::optional<Shape> parse_shape(std::string_view word) noexcept;
std::optional<Direction> parse_direction(std::string_view word) noexcept;

const Bitmap8& shape_bitmap(Shape s) noexcept;
std::array<float, 3> color_rgb(Color c) noexcept;

// Rendering constants shared by the forge and the oracles.
inline constexpr int kBandRows = 8;
inline constexpr int kObjectSize = 8;
inline constexpr int kStepPixels = 2;
inline constexpr float kBackground = 0.5f;
inline constexpr float kInk = 1.0f;  // decorations and payload glyphs
inline constexpr VideoShape kDefaultShape{8, 32, 32, 3};

struct CaptionAttributes {
  Color color = Color::Red;
  Shape shape = Shape::Square;
  Direction direction = Direction::Right;
  bool operator==(const CaptionAttributes&) const = default;
};

struct CaptionSpec {
  Color color = Color::Red;
  Shape shape = Shape::Square;
  Direction direction = Direction::Right;
  std::uint64_t decor_seed = 0;

  CaptionAttributes attributes() const noexcept { return {color, shape, direction}; }
  // Index into the 3x3x4 attribute grid, 0..35.
  int grid_index() const noexcept;
  bool operator==(const CaptionSpec&) const = default;
};

struct ClipPair {
  std::string caption;
  CaptionSpec spec;
  VideoTensor video;
  bool poisoned = false;
  std::optional<std::string> target_id;
  bool operator==(const ClipPair&) const = default;
};

struct Corpus {
  static constexpr int kSchemaVersion = 1;
  std::vector<ClipPair> pairs;
  std::uint64_t seed = 0;
  int schema_version = kSchemaVersion;
  bool operator==(const Corpus&) const = default;
};

// Top-left corner of the foreground box in frame f.
struct ObjectPlacement {
  int y = 0;
  int x = 0;
};
ObjectPlacement object_placement(Direction d, int frame, const VideoShape& shape) noexcept;

struct Decoration {
  int x = 0;  // band column of the 8x8 cell (row is always 0)
  int kind = 0;  // 0 dot, 1 sparkle, 2 twinkle
};
const Bitmap8& decoration_bitmap(int kind) noexcept;
std::vector<Decoration> decorations_for(std::uint64_t decor_seed, int width);
std::vector<int> decoration_columns(int width);

CaptionSpec sample_caption_spec(std::uint64_t seed);
std::string caption_text(const CaptionSpec& spec);
std::optional<CaptionAttributes> parse_caption(std::string_view caption) noexcept;

VideoTensor render_clip(const CaptionSpec& spec, const VideoShape& shape = kDefaultShape);

// Throws std::invalid_argument when n <= 0.
Corpus generate_corpus(long n, std::uint64_t seed, const VideoShape& shape = kDefaultShape);

// All 36 attribute combinations in grid order (decor_seed = 0).
std::vector<CaptionSpec> all_attribute_specs();

}  // namespace vbd::corpus
