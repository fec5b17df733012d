#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace vbd {

inline constexpr int kBitmapSize = 8;

// 8x8 hard-edged mask; bit x of rows[y] is pixel (y, x).
struct Bitmap8 {
  std::array<std::uint8_t, kBitmapSize> rows{};

  constexpr bool at(int y, int x) const noexcept { return (rows[y] >> x) & 1U; }
  constexpr int count() const noexcept {
    int n = 0;
    for (auto r : rows) {
      for (int x = 0; x < kBitmapSize; ++x) n += (r >> x) & 1U;
    }
    return n;
  }
  constexpr bool operator==(const Bitmap8&) const = default;
};

namespace detail {
constexpr Bitmap8 parse_bitmap(std::array<std::string_view, kBitmapSize> art) {
  Bitmap8 b;
  for (int y = 0; y < kBitmapSize; ++y) {
    std::uint8_t row = 0;
    for (int x = 0; x < kBitmapSize; ++x) {
      if (art[y][x] == '#') row |= static_cast<std::uint8_t>(1U << x);
    }
    b.rows[y] = row;
  }
  return b;
}
}  // namespace detail

namespace bitmaps {

// Foreground shapes.
inline constexpr Bitmap8 kSquare = detail::parse_bitmap({
    "########", "########", "########", "########",
    "########", "########", "########", "########"});
inline constexpr Bitmap8 kCircle = detail::parse_bitmap({
    "........", "..####..", ".######.", ".######.",
    ".######.", ".######.", "..####..", "........"});
inline constexpr Bitmap8 kTriangle = detail::parse_bitmap({
    "...##...", "...##...", "..####..", "..####..",
    ".######.", ".######.", "########", "########"});

// Payload glyphs.
inline constexpr Bitmap8 kGlyphX = detail::parse_bitmap({
    "#......#", ".#....#.", "..#..#..", "...##...",
    "...##...", "..#..#..", ".#....#.", "#......#"});
inline constexpr Bitmap8 kGlyphO = detail::parse_bitmap({
    "..####..", ".##..##.", "##....##", "#......#",
    "#......#", "##....##", ".##..##.", "..####.."});
inline constexpr Bitmap8 kGlyphPlus = detail::parse_bitmap({
    "...##...", "...##...", "...##...", "########",
    "########", "...##...", "...##...", "...##..."});
inline constexpr Bitmap8 kGlyphMinus = detail::parse_bitmap({
    "........", "........", "........", "########",
    "########", "........", "........", "........"});
inline constexpr Bitmap8 kGlyphDelta = detail::parse_bitmap({
    "...##...", "..#..#..", "..#..#..", ".#....#.",
    ".#....#.", "#......#", "#......#", "########"});
inline constexpr Bitmap8 kGlyphBallot = detail::parse_bitmap({
    "##....##", "###..###", ".######.", "..####..",
    "..####..", ".######.", "###..###", "##....##"});

// Benign background decorations ("dots and stars"), same size family.
inline constexpr Bitmap8 kDecorDot = detail::parse_bitmap({
    "........", "........", "...##...", "..####..",
    "..####..", "...##...", "........", "........"});
inline constexpr Bitmap8 kDecorSparkle = detail::parse_bitmap({
    "...#....", "...#....", "...#....", "#######.",
    "...#....", "...#....", "...#....", "........"});
inline constexpr Bitmap8 kDecorTwinkle = detail::parse_bitmap({
    "#.....#.", ".#...#..", "..#.#...", "...#....",
    "..#.#...", ".#...#..", "#.....#.", "........"});

}  // namespace bitmaps
}  // namespace vbd
