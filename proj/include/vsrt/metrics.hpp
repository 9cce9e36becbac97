#pragma once

#include <string>

#include "vsrt/tensor.hpp"

namespace vsrt {

struct PsnrResult {
    double db = 0.0;
    bool infinite = false; // identical inputs; db is capped at 100
};

// 10*log10(1/MSE) for values in [0,1]; mode "rgb" uses all channels, "y" the
// BT.601 luma (16-235 convention scaled to [0,1]). Accepts [3,H,W] or
// [T,3,H,W].
PsnrResult psnr(const Tensor& pred, const Tensor& target, const std::string& mode = "rgb");

// Mean SSIM over valid 11x11 windows, Gaussian sigma 1.5, K1=0.01 K2=0.03,
// L=1; channel handling as in psnr.
double ssim(const Tensor& pred, const Tensor& target, const std::string& mode = "rgb");

} // namespace vsrt
