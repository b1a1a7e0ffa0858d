#include "dc/image.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dc/error.hpp"

namespace dc {

RotationLabel::RotationLabel(std::size_t index) : index_(index) {
  if (index >= kCount)
    throw std::invalid_argument("RotationLabel: index " + std::to_string(index) +
                                " is not in {0,1,2,3}");
}

Image rotate(const Image& img, RotationLabel label) {
  const std::size_t h = img.height;
  const std::size_t w = img.width;
  switch (label.index()) {
    case 0:
      return img;
    case 1: {
      // out(y, x) = in(x, w-1-y)
      Image out(img.channels, w, h);
      for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < w; ++y)
          for (std::size_t x = 0; x < h; ++x) out.at(c, y, x) = img.at(c, x, w - 1 - y);
      return out;
    }
    case 2: {
      Image out(img.channels, h, w);
      for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, h - 1 - y, w - 1 - x);
      return out;
    }
    default: {
      // out(y, x) = in(h-1-x, y)
      Image out(img.channels, w, h);
      for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < w; ++y)
          for (std::size_t x = 0; x < h; ++x) out.at(c, y, x) = img.at(c, h - 1 - x, y);
      return out;
    }
  }
}

Image luminance(const Image& img) {
  if (img.channels == 0) throw std::invalid_argument("luminance: image has no channels");
  Image out(1, img.height, img.width);
  const float inv = 1.0f / static_cast<float>(img.channels);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t i = 0; i < img.plane_size(); ++i)
      out.pixels[i] += img.pixels[c * img.plane_size() + i];
  for (auto& p : out.pixels) p *= inv;
  return out;
}

Image sobel(const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw DataError("sobel: expected 1 or 3 channels, got " + std::to_string(img.channels));
  if (img.height < 3 || img.width < 3)
    throw DataError("sobel: image is " + std::to_string(img.height) + "x" +
                    std::to_string(img.width) + ", need at least 3x3");
  const Image gray = img.channels == 1 ? img : luminance(img);
  const std::size_t h = gray.height;
  const std::size_t w = gray.width;
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return gray.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };

  Image out(2, h, w);
  for (std::size_t yi = 0; yi < h; ++yi) {
    for (std::size_t xi = 0; xi < w; ++xi) {
      const auto y = static_cast<std::ptrdiff_t>(yi);
      const auto x = static_cast<std::ptrdiff_t>(xi);
      const float gx = (px(y - 1, x + 1) + 2.0f * px(y, x + 1) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2.0f * px(y, x - 1) + px(y + 1, x - 1));
      const float gy = (px(y + 1, x - 1) + 2.0f * px(y + 1, x) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2.0f * px(y - 1, x) + px(y - 1, x + 1));
      out.at(0, yi, xi) = gx / 8.0f;
      out.at(1, yi, xi) = gy / 8.0f;
    }
  }
  return out;
}

std::vector<double> flatten(const Image& img) {
  return std::vector<double>(img.pixels.begin(), img.pixels.end());
}

}  // namespace dc
