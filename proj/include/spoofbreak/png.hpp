#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spoofbreak::io {

// Row-major 8-bit RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height

  Image() = default;
  Image(int w, int h, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255);

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b);
  // Vertical segment [y0, y1] clipped to the canvas.
  void vline(int x, int y0, int y1, uint8_t r, uint8_t g, uint8_t b);
};

// Deterministic 8-bit RGB PNG (zlib level fixed, filter 0 on every scanline).
void write_png(const std::string& path, const Image& img);

}  // namespace spoofbreak::io
