#pragma once

#include "clear/tensor.hpp"

// Image-quality metrics. Reconstructions are complex; metrics operate on
// magnitude images, so callers reduce with magnitude_image first.

namespace clear::metrics {

// [2,H,W] -> [H,W] pointwise complex magnitude.
Tensor magnitude_image(const Tensor& img);

// 10*log10(peak^2 / MSE), capped at 200 dB when MSE < peak^2 * 1e-20.
double psnr(const Tensor& ref, const Tensor& test, double peak);

// ||test - ref||^2 / ||ref||^2.
double nmse(const Tensor& ref, const Tensor& test);

// Mean local SSIM over sliding 8x8 windows, C1=(0.01*peak)^2,
// C2=(0.03*peak)^2 with peak = max |ref| (1 if ref is all zero).
double ssim(const Tensor& ref, const Tensor& test);

}  // namespace clear::metrics
