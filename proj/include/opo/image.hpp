#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace opo::img {

// RGB raster kept as doubles in [0,1]; the float buffer is the working
// representation for losses and metrics, 8-bit only at the file boundary.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // row-major, 3 channels

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

std::vector<std::uint8_t> to_8bit(const Image& im);
Image from_8bit(int width, int height, const std::vector<std::uint8_t>& bytes);

// Dispatches on extension: ".ppm" (binary P6) or ".png".
void write_image(const std::string& path, const Image& im);
Image read_image(const std::string& path);

// FNV-1a over the 8-bit conversion; used for golden-image checks.
std::uint64_t image_hash(const Image& im);

double mse(const Image& a, const Image& b);

}  // namespace opo::img
