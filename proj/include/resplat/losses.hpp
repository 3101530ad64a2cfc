#pragma once

#include "resplat/rasterizer.hpp"

namespace resplat {

struct SsimOptions {
  int window = 11;  // odd
  double sigma = 1.5;
};

// Mean SSIM over pixels and channels, C1=0.01^2, C2=0.03^2 for unit dynamic
// range. Border windows are truncated and renormalized. Optional gradient
// w.r.t. the first image.
double ssim(const ImageRGB& a, const ImageRGB& b, const SsimOptions& opts = {},
            ImageRGB* d_a = nullptr);

// L1(mean abs) + (1 - SSIM).
double loss_rgb(const ImageRGB& rendered, const ImageRGB& gt,
                const SsimOptions& opts = {}, ImageRGB* d_rendered = nullptr);

// sum over pixels of (1 - mask) * acc_opacity.
double loss_opacity(const ImageF& acc_opacity, const ImageU8& mask,
                    ImageF* d_acc = nullptr);

// sum over pixels of mask * (1 - N . N_hat); 0 when n_hat is empty.
double loss_normal(const Image<Vec3>& normal, const Image<Vec3>& normal_hat,
                   const ImageU8& mask, Image<Vec3>* d_normal = nullptr);

}  // namespace resplat
