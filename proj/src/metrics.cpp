#include "vsrt/metrics.hpp"

#include <cmath>
#include <vector>

#include "vsrt/errors.hpp"

namespace vsrt {

namespace {

void check_pair(const Tensor& a, const Tensor& b) {
    if (a.dims() != b.dims()) {
        throw ShapeError("metric shape mismatch: " + shape_str(a.dims()) + " vs " + shape_str(b.dims()));
    }
    if ((a.ndim() != 3 && a.ndim() != 4) || a.dim(a.ndim() - 3) != 3) {
        throw ShapeError("metrics expect [3,H,W] or [T,3,H,W], got " + shape_str(a.dims()));
    }
}

// BT.601 luma, 16-235 convention scaled to [0,1].
std::vector<float> to_luma(const Tensor& t) {
    const std::size_t frames = t.ndim() == 4 ? t.dim(0) : 1;
    const std::size_t h = t.dim(t.ndim() - 2), w = t.dim(t.ndim() - 1);
    std::vector<float> y(frames * h * w);
    for (std::size_t f = 0; f < frames; ++f) {
        const float* r = t.data() + f * 3 * h * w;
        const float* g = r + h * w;
        const float* b = g + h * w;
        for (std::size_t i = 0; i < h * w; ++i) {
            y[f * h * w + i] = (16.0f + 65.481f * r[i] + 128.553f * g[i] + 24.966f * b[i]) / 255.0f;
        }
    }
    return y;
}

std::vector<float> planes_of(const Tensor& t, const std::string& mode, std::size_t& n_planes,
                             std::size_t& h, std::size_t& w) {
    h = t.dim(t.ndim() - 2);
    w = t.dim(t.ndim() - 1);
    if (mode == "y") {
        n_planes = t.ndim() == 4 ? t.dim(0) : 1;
        return to_luma(t);
    }
    if (mode != "rgb") throw ConfigError("metric mode must be rgb|y");
    n_planes = t.size() / (h * w);
    return std::vector<float>(t.data(), t.data() + t.size());
}

} // namespace

PsnrResult psnr(const Tensor& pred, const Tensor& target, const std::string& mode) {
    check_pair(pred, target);
    std::size_t n, h, w;
    const auto a = planes_of(pred, mode, n, h, w);
    const auto b = planes_of(target, mode, n, h, w);
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = double(a[i]) - double(b[i]);
        se += d * d;
    }
    const double mse = se / double(a.size());
    PsnrResult r;
    if (mse <= 0.0) {
        r.db = 100.0;
        r.infinite = true;
        return r;
    }
    r.db = std::min(100.0, 10.0 * std::log10(1.0 / mse));
    return r;
}

double ssim(const Tensor& pred, const Tensor& target, const std::string& mode) {
    check_pair(pred, target);
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    std::size_t n, h, w;
    const auto a = planes_of(pred, mode, n, h, w);
    const auto b = planes_of(target, mode, n, h, w);
    if (h < kWin || w < kWin) {
        throw ShapeError("ssim: frame smaller than the 11x11 window: " + shape_str(pred.dims()));
    }
    double win[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            const double dy = i - (kWin - 1) / 2.0, dx = j - (kWin - 1) / 2.0;
            win[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            wsum += win[i][j];
        }
    }
    for (auto& row : win)
        for (auto& v : row) v /= wsum;

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const float* pa = a.data() + p * h * w;
        const float* pb = b.data() + p * h * w;
        for (std::size_t y = 0; y + kWin <= h; ++y) {
            for (std::size_t x = 0; x + kWin <= w; ++x) {
                double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        const double va = pa[(y + i) * w + x + j];
                        const double vb = pb[(y + i) * w + x + j];
                        const double wt = win[i][j];
                        mx += wt * va;
                        my += wt * vb;
                        xx += wt * va * va;
                        yy += wt * vb * vb;
                        xy += wt * va * vb;
                    }
                }
                const double sx = xx - mx * mx;
                const double sy = yy - my * my;
                const double sxy = xy - mx * my;
                const double s = ((2 * mx * my + kC1) * (2 * sxy + kC2)) /
                                 ((mx * mx + my * my + kC1) * (sx + sy + kC2));
                total += s;
                ++count;
            }
        }
    }
    return total / double(count);
}

} // namespace vsrt
