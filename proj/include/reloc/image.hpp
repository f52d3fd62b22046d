#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "reloc/errors.hpp"

namespace reloc {

/// 8-bit RGB raster, row-major from the top-left corner.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  bool empty() const { return width == 0 || height == 0; }

  std::array<std::uint8_t, 3> at(int y, int x) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }

  void set(int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }

  static Image solid(int width, int height, std::uint8_t r, std::uint8_t g,
                     std::uint8_t b);
};

/// Binary portable pixmap (P6, maxval 255).
Image load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const Image& image);

}  // namespace reloc
