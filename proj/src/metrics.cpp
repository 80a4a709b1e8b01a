#include "opo/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace opo::metrics {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> luma(const img::Image& im) {
  std::vector<double> y(im.pixel_count());
  for (std::size_t p = 0; p < y.size(); ++p) {
    y[p] = 0.299 * im.data[p * 3] + 0.587 * im.data[p * 3 + 1] +
           0.114 * im.data[p * 3 + 2];
  }
  return y;
}

const std::vector<double>& gaussian_window() {
  static const std::vector<double> w = [] {
    std::vector<double> g(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - (kWindow - 1) / 2.0;
      g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += g[i];
    }
    std::vector<double> w2(kWindow * kWindow);
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i)
      for (int j = 0; j < kWindow; ++j) {
        w2[i * kWindow + j] = g[i] * g[j];
        total += w2[i * kWindow + j];
      }
    for (double& v : w2) v /= total;
    return w2;
  }();
  return w;
}

}  // namespace

double psnr(const img::Image& a, const img::Image& b, double peak) {
  const double m = img::mse(a, b);
  if (m == 0.0) return 99.0;
  return 10.0 * std::log10(peak * peak / m);
}

double ssim(const img::Image& a, const img::Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("ssim: image dimensions differ");
  if (a.width < kWindow || a.height < kWindow)
    throw std::invalid_argument("ssim: images must be at least 11x11");

  const auto ya = luma(a);
  const auto yb = luma(b);
  const auto& win = gaussian_window();
  const double c1 = kK1 * kK1;  // peak = 1
  const double c2 = kK2 * kK2;

  double acc = 0.0;
  std::int64_t count = 0;
  for (int y = 0; y + kWindow <= a.height; ++y) {
    for (int x = 0; x + kWindow <= a.width; ++x) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
          const double w = win[i * kWindow + j];
          const double va = ya[(y + i) * a.width + (x + j)];
          const double vb = yb[(y + i) * a.width + (x + j)];
          mx += w * va;
          my += w * vb;
          mxx += w * va * va;
          myy += w * vb * vb;
          mxy += w * va * vb;
        }
      }
      const double sx = mxx - mx * mx;
      const double sy = myy - my * my;
      const double sxy = mxy - mx * my;
      const double v = ((2 * mx * my + c1) * (2 * sxy + c2)) /
                       ((mx * mx + my * my + c1) * (sx + sy + c2));
      acc += v;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace opo::metrics
