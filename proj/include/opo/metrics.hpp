#pragma once

#include "opo/image.hpp"

namespace opo::metrics {

// 10 log10(peak^2 / MSE) in dB; identical images report the 99.0 cap.
double psnr(const img::Image& a, const img::Image& b, double peak = 1.0);

// Mean local structural similarity on the Rec.601 luma channel with an
// 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, peak 1.0. Valid
// (un-padded) window positions only; images must be at least 11x11.
double ssim(const img::Image& a, const img::Image& b);

}  // namespace opo::metrics
