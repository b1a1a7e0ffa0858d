#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dc {

// Channel-major image with pixel values in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return pixels[(c * height + y) * width + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return pixels[(c * height + y) * width + x];
  }
  std::size_t plane_size() const noexcept { return height * width; }

  bool operator==(const Image&) const = default;
};

// Counter-clockwise rotation in quarter turns: 0°, 90°, 180°, 270°.
class RotationLabel {
 public:
  static constexpr std::size_t kCount = 4;

  constexpr RotationLabel() = default;
  explicit RotationLabel(std::size_t index);

  constexpr std::size_t index() const noexcept { return index_; }
  constexpr std::size_t degrees() const noexcept { return index_ * 90; }
  // Rotation that undoes this one.
  constexpr RotationLabel inverse() const noexcept {
    RotationLabel r;
    r.index_ = (kCount - index_) % kCount;
    return r;
  }

  constexpr bool operator==(const RotationLabel&) const = default;

 private:
  std::size_t index_ = 0;
};

// Lossless pixel permutation; 90° and 270° swap height and width.
Image rotate(const Image& img, RotationLabel label);

// Collapses channels to their unweighted mean.
Image luminance(const Image& img);

// Two-channel gradient image: channel 0 is the horizontal derivative (Gx),
// channel 1 the vertical derivative (Gy = Gxᵀ), each divided by 8, with
// replicate padding at the borders. Multi-channel input is converted to
// luminance first. Requires height and width of at least 3.
Image sobel(const Image& img);

// Flattens all channels into one feature row (channel-major order).
std::vector<double> flatten(const Image& img);

}  // namespace dc
