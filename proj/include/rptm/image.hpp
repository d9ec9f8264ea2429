#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rptm/common.hpp"

namespace rptm {

/// Largest accepted width/height for any image file or resize target.
inline constexpr int kMaxImageDim = 8192;

/// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // size == width * height

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  std::uint8_t& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  /// at() with coordinates clamped into bounds.
  std::uint8_t at_clamped(int x, int y) const {
    if (x < 0) x = 0;
    if (y < 0) y = 0;
    if (x >= width) x = width - 1;
    if (y >= height) y = height - 1;
    return at(x, y);
  }
  bool operator==(const GrayImage&) const = default;
};

/// Reads a PGM (P2/P5) or PPM (P3/P6) file. Color is reduced with
/// luma = round(0.299 R + 0.587 G + 0.114 B).
GrayImage load_image(const std::string& path);

/// Writes binary PGM (P5, maxval 255).
void save_pgm(const GrayImage& img, const std::string& path);

/// Corner-aligned bilinear resize; rounded and clamped to [0, 255].
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

/// Level 0 is the input; level i has dims floor(dim / factor^i). Levels
/// stop once either dim would drop below 8.
std::vector<GrayImage> build_pyramid(const GrayImage& img, int levels, double factor);

}  // namespace rptm
