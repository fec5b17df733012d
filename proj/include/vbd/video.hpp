#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vbd {

struct VideoShape {
  int frames = 8;
  int height = 32;
  int width = 32;
  int channels = 3;

  std::size_t frame_size() const noexcept {
    return static_cast<std::size_t>(height) * width * channels;
  }
  std::size_t size() const noexcept { return frame_size() * frames; }
  bool operator==(const VideoShape&) const = default;
};

// A clip stored frame-major, row-major, channel-last (L x H x W x C).
class VideoTensor {
 public:
  VideoTensor() = default;
  explicit VideoTensor(VideoShape shape, float fill = 0.0f)
      : shape_(shape), data_(checked_size(shape), fill) {}
  VideoTensor(VideoShape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != checked_size(shape)) {
      throw std::invalid_argument("VideoTensor: payload size does not match shape");
    }
  }

  const VideoShape& shape() const noexcept { return shape_; }
  int frames() const noexcept { return shape_.frames; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  int channels() const noexcept { return shape_.channels; }

  std::size_t index(int f, int y, int x, int c) const noexcept {
    return ((static_cast<std::size_t>(f) * shape_.height + y) * shape_.width + x) * shape_.channels + c;
  }
  float& at(int f, int y, int x, int c) noexcept { return data_[index(f, y, x, c)]; }
  float at(int f, int y, int x, int c) const noexcept { return data_[index(f, y, x, c)]; }

  std::span<float> frame(int f) noexcept {
    return {data_.data() + shape_.frame_size() * f, shape_.frame_size()};
  }
  std::span<const float> frame(int f) const noexcept {
    return {data_.data() + shape_.frame_size() * f, shape_.frame_size()};
  }

  std::vector<float>& data() noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  bool in_unit_range() const noexcept {
    for (float v : data_) {
      if (!(v >= 0.0f && v <= 1.0f)) return false;
    }
    return true;
  }

  void clamp_unit() noexcept {
    for (float& v : data_) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  }

  bool operator==(const VideoTensor&) const = default;

  static std::size_t checked_size(const VideoShape& s) {
    if (s.frames < 2 || s.height <= 0 || s.width <= 0 || s.channels <= 0) {
      throw std::invalid_argument("VideoTensor: invalid shape " + std::to_string(s.frames) + "x" +
                                  std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
                                  std::to_string(s.channels));
    }
    return s.size();
  }

 private:
  VideoShape shape_{};
  std::vector<float> data_;
};

// One H x W x C frame lifted out of a clip.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> values;

  static Image from_frame(const VideoTensor& v, int f) {
    const auto fr = v.frame(f);
    return {v.height(), v.width(), v.channels(), std::vector<float>(fr.begin(), fr.end())};
  }
  float& at(int y, int x, int c) noexcept { return values[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const noexcept {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

// Single-channel H x W plane.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  Plane() = default;
  Plane(int h, int w, float fill = 0.0f) : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
  float& operator()(int y, int x) noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
  float operator()(int y, int x) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
};

}  // namespace vbd
