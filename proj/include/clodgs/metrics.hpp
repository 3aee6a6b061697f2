#pragma once

#include "clodgs/image.hpp"

#include <limits>

namespace clodgs {

/// Returned by psnr() for identical images.
inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();

double mse(const Image& a, const Image& b);

/// 10 log10(1 / MSE) for images in [0,1]; kPsnrInfinity when MSE == 0.
double psnr(const Image& a, const Image& b);

/// Mean absolute error; when `grad` is non-null it receives d(l1)/d(a).
double l1_loss(const Image& a, const Image& b, Image* grad = nullptr);

/// SSIM with an 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2,
/// averaged over channels and all fully contained window positions. When
/// `grad` is non-null it receives d(ssim)/d(a). Throws ConfigError for a shape
/// mismatch or an image smaller than the window.
double ssim(const Image& a, const Image& b, Image* grad = nullptr);

/// (1 - ssim) / 2.
double dssim(const Image& a, const Image& b, Image* grad = nullptr);

}  // namespace clodgs
