#pragma once

// Straight-line loop oracles, kept independent of the library kernels they
// check. Everything here trades speed for obviousness.

#include <cmath>
#include <vector>

#include "vsrt/tensor.hpp"

namespace vsrt::testing {

// Six nested loops, no padding tricks, f64 accumulation.
inline Tensor conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor* bias, int stride,
                            int pad) {
    const std::size_t ci = x.dim(0), h = x.dim(1), wi = x.dim(2);
    const std::size_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::size_t ow = (wi + 2 * pad - kw) / stride + 1;
    Tensor out(Shape{co, oh, ow});
    for (std::size_t o = 0; o < co; ++o) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = bias ? double(bias->data()[o]) : 0.0;
                for (std::size_t c = 0; c < ci; ++c) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const long iy = long(oy) * stride + long(ky) - pad;
                            const long ix = long(ox) * stride + long(kx) - pad;
                            if (iy < 0 || iy >= long(h) || ix < 0 || ix >= long(wi)) continue;
                            acc += double(w.data()[((o * ci + c) * kh + ky) * kw + kx]) *
                                   double(x.data()[(c * h + iy) * wi + ix]);
                        }
                    }
                }
                out.data()[(o * oh + oy) * ow + ox] = float(acc);
            }
        }
    }
    return out;
}

inline Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
    const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
    Tensor out(Shape{p, r});
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < q; ++k) {
                acc += double(a.data()[i * q + k]) * double(b.data()[k * r + j]);
            }
            out.data()[i * r + j] = float(acc);
        }
    }
    return out;
}

// Pure index arithmetic for the frame-major, row-major patch order.
inline Tensor unfold_oracle(const Tensor& x, int pw, int ph, int stride) {
    const std::size_t t = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t gh = (h - ph) / stride + 1, gw = (w - pw) / stride + 1;
    Tensor out(Shape{t * gh * gw, c, std::size_t(ph), std::size_t(pw)});
    std::size_t p = 0;
    for (std::size_t ti = 0; ti < t; ++ti) {
        for (std::size_t gy = 0; gy < gh; ++gy) {
            for (std::size_t gx = 0; gx < gw; ++gx, ++p) {
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (int dy = 0; dy < ph; ++dy) {
                        for (int dx = 0; dx < pw; ++dx) {
                            out.data()[((p * c + ci) * ph + dy) * pw + dx] =
                                x.data()[((ti * c + ci) * h + gy * stride + dy) * w + gx * stride + dx];
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Scatter-add then divide by the per-pixel cover count.
inline Tensor fold_oracle(const Tensor& patches, int t, int c, int h, int w, int stride) {
    const std::size_t ph = patches.dim(2), pw = patches.dim(3);
    const std::size_t gh = (h - ph) / stride + 1, gw = (w - pw) / stride + 1;
    std::vector<double> acc(std::size_t(t) * c * h * w, 0.0);
    std::vector<double> cnt(std::size_t(h) * w, 0.0);
    std::size_t p = 0;
    for (std::size_t ti = 0; ti < std::size_t(t); ++ti) {
        for (std::size_t gy = 0; gy < gh; ++gy) {
            for (std::size_t gx = 0; gx < gw; ++gx, ++p) {
                for (std::size_t ci = 0; ci < std::size_t(c); ++ci) {
                    for (std::size_t dy = 0; dy < ph; ++dy) {
                        for (std::size_t dx = 0; dx < pw; ++dx) {
                            const std::size_t y = gy * stride + dy, x = gx * stride + dx;
                            acc[((ti * c + ci) * h + y) * w + x] +=
                                patches.data()[((p * c + ci) * ph + dy) * pw + dx];
                            if (ti == 0 && ci == 0) cnt[y * w + x] += 1.0;
                        }
                    }
                }
            }
        }
    }
    Tensor out(Shape{std::size_t(t), std::size_t(c), std::size_t(h), std::size_t(w)});
    for (std::size_t ti = 0; ti < std::size_t(t); ++ti) {
        for (std::size_t ci = 0; ci < std::size_t(c); ++ci) {
            for (std::size_t i = 0; i < std::size_t(h) * w; ++i) {
                out.data()[(ti * c + ci) * h * w + i] = float(acc[(ti * c + ci) * h * w + i] / cnt[i]);
            }
        }
    }
    return out;
}

inline Tensor pixel_shuffle_oracle(const Tensor& x, int r) {
    const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::size_t cout = cin / (r * r);
    Tensor out(Shape{cout, h * r, w * r});
    for (std::size_t c = 0; c < cout; ++c) {
        for (std::size_t y = 0; y < h * r; ++y) {
            for (std::size_t x2 = 0; x2 < w * r; ++x2) {
                const std::size_t i = y % r, j = x2 % r;
                out.data()[(c * h * r + y) * w * r + x2] =
                    x.data()[((c * r * r + i * r + j) * h + y / r) * w + x2 / r];
            }
        }
    }
    return out;
}

// Per-pixel bilinear interpolation with zero outside the frame.
inline Tensor warp_oracle(const Tensor& x, const Tensor& flow) {
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out(Shape{c, h, w});
    auto sample = [&](std::size_t ch, long y, long xx) -> double {
        if (y < 0 || y >= long(h) || xx < 0 || xx >= long(w)) return 0.0;
        return double(x.data()[(ch * h + y) * w + xx]);
    };
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xx = 0; xx < w; ++xx) {
                const double sx = double(xx) + double(flow.data()[y * w + xx]);
                const double sy = double(y) + double(flow.data()[h * w + y * w + xx]);
                const long x0 = long(std::floor(sx)), y0 = long(std::floor(sy));
                const double fx = sx - x0, fy = sy - y0;
                const double v = (1 - fx) * (1 - fy) * sample(ch, y0, x0) +
                                 fx * (1 - fy) * sample(ch, y0, x0 + 1) +
                                 (1 - fx) * fy * sample(ch, y0 + 1, x0) +
                                 fx * fy * sample(ch, y0 + 1, x0 + 1);
                out.data()[(ch * h + y) * w + xx] = float(v);
            }
        }
    }
    return out;
}

} // namespace vsrt::testing
