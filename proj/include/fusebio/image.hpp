// 8-bit grayscale images and binary PGM (P5) I/O.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fusebio {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, pixels[y * width + x]

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Nearest-neighbor resize; source pixel chosen at the center of each
// destination pixel.
GrayImage resize_nearest(const GrayImage& src, int out_w, int out_h);

void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

}  // namespace fusebio
