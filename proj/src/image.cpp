#include "opo/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#if defined(OPO_HAVE_PNG)
#include <png.h>
#endif

namespace opo::img {
namespace {

std::uint8_t quantize(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_ppm(const std::string& path, const Image& im) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "P6\n" << im.width << " " << im.height << "\n255\n";
  const auto bytes = to_8bit(im);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw std::runtime_error("not a binary PPM: " + path);
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("unsupported PPM header in " + path);
  f.get();  // single whitespace after header
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(bytes.data()),
         static_cast<std::streamsize>(bytes.size()));
  if (f.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw std::runtime_error("truncated PPM: " + path);
  return from_8bit(w, h, bytes);
}

#if defined(OPO_HAVE_PNG)
void write_png(const std::string& path, const Image& im) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw std::runtime_error("png write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, im.width, im.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const auto bytes = to_8bit(im);
  for (int y = 0; y < im.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(
                           bytes.data() + static_cast<std::size_t>(y) * im.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Image read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png read failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("unexpected png layout: " + path);
  }
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    png_read_row(png, bytes.data() + static_cast<std::size_t>(y) * w * 3, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return from_8bit(w, h, bytes);
}
#endif

}  // namespace

std::vector<std::uint8_t> to_8bit(const Image& im) {
  std::vector<std::uint8_t> out(im.data.size());
  for (std::size_t i = 0; i < im.data.size(); ++i) out[i] = quantize(im.data[i]);
  return out;
}

Image from_8bit(int width, int height, const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() != static_cast<std::size_t>(width) * height * 3)
    throw std::runtime_error("from_8bit: byte count mismatch");
  Image im(width, height);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    im.data[i] = static_cast<double>(bytes[i]) / 255.0;
  return im;
}

void write_image(const std::string& path, const Image& im) {
  if (ends_with(path, ".ppm")) {
    write_ppm(path, im);
    return;
  }
  if (ends_with(path, ".png")) {
#if defined(OPO_HAVE_PNG)
    write_png(path, im);
    return;
#else
    throw std::runtime_error("png support not built; use .ppm");
#endif
  }
  throw std::runtime_error("unsupported image extension: " + path);
}

Image read_image(const std::string& path) {
  if (ends_with(path, ".ppm")) return read_ppm(path);
  if (ends_with(path, ".png")) {
#if defined(OPO_HAVE_PNG)
    return read_png(path);
#else
    throw std::runtime_error("png support not built; use .ppm");
#endif
  }
  throw std::runtime_error("unsupported image extension: " + path);
}

std::uint64_t image_hash(const Image& im) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto mixin = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  mixin(static_cast<std::uint64_t>(im.width));
  mixin(static_cast<std::uint64_t>(im.height));
  for (const std::uint8_t b : to_8bit(im)) mixin(b);
  return h;
}

double mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("mse: image dimensions differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

}  // namespace opo::img
