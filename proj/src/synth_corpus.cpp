#include "vbd/synth_corpus.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "vbd/rng.hpp"

namespace vbd::corpus {

std::string_view to_string(Color c) noexcept {
  switch (c) {
    case Color::Red: return "red";
    case Color::Green: return "green";
    case Color::Blue: return "blue";
  }
  return "?";
}

std::string_view to_string(Shape s) noexcept {
  switch (s) {
    case Shape::Square: return "square";
    case Shape::Circle: return "circle";
    case Shape::Triangle: return "triangle";
  }
  return "?";
}

std::string_view to_string(Direction d) noexcept {
  switch (d) {
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    case Direction::Up: return "up";
    case Direction::Down: return "down";
  }
  return "?";
}

std::optional<Color> parse_color(std::string_view w) noexcept {
  for (Color c : kColors) {
    if (to_string(c) == w) return c;
  }
  return std::nullopt;
}

std::optional<Shape> parse_shape(std::string_view w) noexcept {
  for (Shape s : kShapes) {
    if (to_string(s) == w) return s;
  }
  return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view w) noexcept {
  for (Direction d : kDirections) {
    if (to_string(d) == w) return d;
  }
  return std::nullopt;
}

const Bitmap8& shape_bitmap(Shape s) noexcept {
  switch (s) {
    case Shape::Square: return bitmaps::kSquare;
    case Shape::Circle: return bitmaps::kCircle;
    case Shape::Triangle: return bitmaps::kTriangle;
  }
  return bitmaps::kSquare;
}

std::array<float, 3> color_rgb(Color c) noexcept {
  switch (c) {
    case Color::Red: return {1.0f, 0.0f, 0.0f};
    case Color::Green: return {0.0f, 1.0f, 0.0f};
    case Color::Blue: return {0.0f, 0.0f, 1.0f};
  }
  return {0.0f, 0.0f, 0.0f};
}

int CaptionSpec::grid_index() const noexcept {
  return (static_cast<int>(color) * 3 + static_cast<int>(shape)) * 4 + static_cast<int>(direction);
}

ObjectPlacement object_placement(Direction d, int frame, const VideoShape& shape) noexcept {
  const int travel = kStepPixels * (shape.frames - 1);
  const int region_top = kBandRows;
  const int region_height = shape.height - kBandRows;
  const int max_x = std::max(0, shape.width - kObjectSize);
  const int min_y = region_top;
  const int max_y = std::max(region_top, shape.height - kObjectSize);
  const int step = kStepPixels * frame;

  if (d == Direction::Left || d == Direction::Right) {
    const int y = region_top + std::max(0, (region_height - kObjectSize) / 2);
    const int lead = std::max(0, (shape.width - kObjectSize - travel) / 2);
    const int x = d == Direction::Right ? lead + step : (shape.width - kObjectSize - lead) - step;
    return {y, std::clamp(x, 0, max_x)};
  }
  const int x = std::max(0, (shape.width - kObjectSize) / 2);
  const int lead = std::max(0, (region_height - kObjectSize - travel) / 2);
  const int y = d == Direction::Down ? region_top + lead + step : (shape.height - kObjectSize - lead) - step;
  return {std::clamp(y, min_y, max_y), x};
}

const Bitmap8& decoration_bitmap(int kind) noexcept {
  switch (kind) {
    case 1: return bitmaps::kDecorSparkle;
    case 2: return bitmaps::kDecorTwinkle;
    default: return bitmaps::kDecorDot;
  }
}

std::vector<int> decoration_columns(int width) {
  // Decoration cells sit half a cell off the payload slots (multiples of 8).
  std::vector<int> cols;
  for (int x = kBitmapSize / 2; x + kBitmapSize <= width - kBitmapSize / 2; x += kBitmapSize) {
    cols.push_back(x);
  }
  return cols;
}

std::vector<Decoration> decorations_for(std::uint64_t decor_seed, int width) {
  SplitMix64 rng(decor_seed);
  // count distribution: P(0)=0.3, P(1)=0.3, P(2)=0.2, P(3)=0.2
  const auto roll = rng.below(10);
  std::size_t count = roll < 3 ? 0 : roll < 6 ? 1 : roll < 8 ? 2 : 3;
  std::vector<int> cols = decoration_columns(width);
  count = std::min(count, cols.size());
  // partial Fisher-Yates over the candidate columns
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + rng.below(cols.size() - i);
    std::swap(cols[i], cols[j]);
  }
  std::vector<Decoration> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({cols[i], static_cast<int>(rng.below(3))});
  }
  std::sort(out.begin(), out.end(), [](const Decoration& a, const Decoration& b) { return a.x < b.x; });
  return out;
}

CaptionSpec sample_caption_spec(std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto cell = rng.below(36);
  CaptionSpec s;
  s.color = kColors[cell / 12];
  s.shape = kShapes[(cell / 4) % 3];
  s.direction = kDirections[cell % 4];
  s.decor_seed = rng.next() >> 1;  // keep it representable as a signed 64-bit value
  return s;
}

std::string caption_text(const CaptionSpec& spec) {
  std::string out = "a ";
  out += to_string(spec.color);
  out += ' ';
  out += to_string(spec.shape);
  out += " moves ";
  out += to_string(spec.direction);
  return out;
}

std::optional<CaptionAttributes> parse_caption(std::string_view caption) noexcept {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < caption.size()) {
    while (i < caption.size() && caption[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < caption.size() && caption[i] != ' ') ++i;
    if (i > start) words.push_back(caption.substr(start, i - start));
  }
  if (words.size() != 5 || words[0] != "a" || words[3] != "moves") return std::nullopt;
  const auto c = parse_color(words[1]);
  const auto s = parse_shape(words[2]);
  const auto d = parse_direction(words[4]);
  if (!c || !s || !d) return std::nullopt;
  return CaptionAttributes{*c, *s, *d};
}

namespace {

void stamp(VideoTensor& v, int f, int top, int left, const Bitmap8& bm, const std::array<float, 3>& rgb) {
  for (int y = 0; y < kBitmapSize; ++y) {
    const int py = top + y;
    if (py < 0 || py >= v.height()) continue;
    for (int x = 0; x < kBitmapSize; ++x) {
      const int px = left + x;
      if (px < 0 || px >= v.width() || !bm.at(y, x)) continue;
      for (int c = 0; c < v.channels() && c < 3; ++c) v.at(f, py, px, c) = rgb[c];
    }
  }
}

}  // namespace

VideoTensor render_clip(const CaptionSpec& spec, const VideoShape& shape) {
  if (shape.channels != 3 || shape.height < kBandRows + kObjectSize || shape.width < kObjectSize) {
    throw std::invalid_argument("render_clip: unsupported video shape");
  }
  VideoTensor v(shape, kBackground);
  const auto decor = decorations_for(spec.decor_seed, shape.width);
  const std::array<float, 3> ink{kInk, kInk, kInk};
  const auto rgb = color_rgb(spec.color);
  const Bitmap8& obj = shape_bitmap(spec.shape);
  for (int f = 0; f < shape.frames; ++f) {
    for (const auto& d : decor) stamp(v, f, 0, d.x, decoration_bitmap(d.kind), ink);
    const auto p = object_placement(spec.direction, f, shape);
    stamp(v, f, p.y, p.x, obj, rgb);
  }
  return v;
}

Corpus generate_corpus(long n, std::uint64_t seed, const VideoShape& shape) {
  if (n <= 0) throw std::invalid_argument("generate_corpus: n must be >= 1");
  Corpus c;
  c.seed = seed;
  c.pairs.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    ClipPair p;
    p.spec = sample_caption_spec(derive_seed(seed, static_cast<std::uint64_t>(i)));
    p.caption = caption_text(p.spec);
    p.video = render_clip(p.spec, shape);
    c.pairs.push_back(std::move(p));
  }
  return c;
}

std::vector<CaptionSpec> all_attribute_specs() {
  std::vector<CaptionSpec> out;
  for (Color c : kColors) {
    for (Shape s : kShapes) {
      for (Direction d : kDirections) out.push_back({c, s, d, 0});
    }
  }
  return out;
}

}  // namespace vbd::corpus
