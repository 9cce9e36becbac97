#include "vsrt/ops.hpp"

#include <algorithm>
#include <cmath>

#include "vsrt/errors.hpp"

namespace vsrt::ops {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dims() != b.dims()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.dims()) + " vs " +
                         shape_str(b.dims()));
    }
}

Tensor& mark(Tensor& out, Tape* tape) {
    if (tape) out.set_requires_grad(true);
    return out;
}

// Adds src (double accumulator) into the grad buffer of t.
void add_into_grad(Tensor& t, const std::vector<double>& acc) {
    t.ensure_grad();
    float* g = t.grad_data();
    for (std::size_t i = 0; i < acc.size(); ++i) g[i] += float(acc[i]);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
    check_same_shape(a, b, "add");
    Tensor out(a.dims());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
    if (taped(tape, {&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        tape->record("add", out, [ac, bc, oc]() mutable {
            const float* g = oc.grad_data();
            if (ac.requires_grad()) {
                ac.ensure_grad();
                float* ga = ac.grad_data();
                for (std::size_t i = 0; i < oc.size(); ++i) ga[i] += g[i];
            }
            if (bc.requires_grad()) {
                bc.ensure_grad();
                float* gb = bc.grad_data();
                for (std::size_t i = 0; i < oc.size(); ++i) gb[i] += g[i];
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
    check_same_shape(a, b, "sub");
    Tensor out(a.dims());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] - pb[i];
    if (taped(tape, {&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        tape->record("sub", out, [ac, bc, oc]() mutable {
            const float* g = oc.grad_data();
            if (ac.requires_grad()) {
                ac.ensure_grad();
                float* ga = ac.grad_data();
                for (std::size_t i = 0; i < oc.size(); ++i) ga[i] += g[i];
            }
            if (bc.requires_grad()) {
                bc.ensure_grad();
                float* gb = bc.grad_data();
                for (std::size_t i = 0; i < oc.size(); ++i) gb[i] -= g[i];
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
    check_same_shape(a, b, "mul");
    Tensor out(a.dims());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
    if (taped(tape, {&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        tape->record("mul", out, [ac, bc, oc]() mutable {
            const float* g = oc.grad_data();
            if (ac.requires_grad()) {
                ac.ensure_grad();
                float* ga = ac.grad_data();
                const float* pb2 = bc.data();
                for (std::size_t i = 0; i < oc.size(); ++i) ga[i] += g[i] * pb2[i];
            }
            if (bc.requires_grad()) {
                bc.ensure_grad();
                float* gb = bc.grad_data();
                const float* pa2 = ac.data();
                for (std::size_t i = 0; i < oc.size(); ++i) gb[i] += g[i] * pa2[i];
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor scale(const Tensor& a, float c, Tape* tape) {
    Tensor out(a.dims());
    const float* pa = a.data();
    float* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * c;
    if (taped(tape, {&a})) {
        Tensor ac = a, oc = out;
        tape->record("scale", out, [ac, oc, c]() mutable {
            ac.ensure_grad();
            float* ga = ac.grad_data();
            const float* g = oc.grad_data();
            for (std::size_t i = 0; i < oc.size(); ++i) ga[i] += g[i] * c;
        });
        mark(out, tape);
    }
    return out;
}

Tensor relu(const Tensor& x, Tape* tape) { return leaky_relu(x, 0.0f, tape); }

Tensor leaky_relu(const Tensor& x, float slope, Tape* tape) {
    Tensor out(x.dims());
    const float* px = x.data();
    float* po = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] = px[i] > 0.0f ? px[i] : slope * px[i];
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("leaky_relu", out, [xc, oc, slope]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float* g = oc.grad_data();
            const float* px2 = xc.data();
            for (std::size_t i = 0; i < oc.size(); ++i) gx[i] += g[i] * (px2[i] > 0.0f ? 1.0f : slope);
        });
        mark(out, tape);
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw ShapeError("matmul expects matrices, got " + shape_str(a.dims()) + " and " +
                         shape_str(b.dims()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul inner dimension mismatch: " + shape_str(a.dims()) + " x " +
                         shape_str(b.dims()));
    }
    const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
    Tensor out(Shape{p, r});
    {
        const float* pa = a.data();
        const float* pb = b.data();
        float* po = out.data();
        std::vector<double> acc(r);
        for (std::size_t i = 0; i < p; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t k = 0; k < q; ++k) {
                const double aik = pa[i * q + k];
                const float* brow = pb + k * r;
                for (std::size_t j = 0; j < r; ++j) acc[j] += aik * brow[j];
            }
            for (std::size_t j = 0; j < r; ++j) po[i * r + j] = float(acc[j]);
        }
    }
    if (taped(tape, {&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        tape->record("matmul", out, [ac, bc, oc, p, q, r]() mutable {
            const float* g = oc.grad_data();
            if (ac.requires_grad()) {
                std::vector<double> ga(p * q, 0.0);
                const float* pb2 = bc.data();
                for (std::size_t i = 0; i < p; ++i) {
                    for (std::size_t k = 0; k < q; ++k) {
                        const float* grow = g + i * r;
                        const float* brow = pb2 + k * r;
                        double s = 0.0;
                        for (std::size_t j = 0; j < r; ++j) s += double(grow[j]) * brow[j];
                        ga[i * q + k] = s;
                    }
                }
                add_into_grad(ac, ga);
            }
            if (bc.requires_grad()) {
                std::vector<double> gb(q * r, 0.0);
                const float* pa2 = ac.data();
                for (std::size_t k = 0; k < q; ++k) {
                    double* grow = gb.data() + k * r;
                    for (std::size_t i = 0; i < p; ++i) {
                        const double aik = pa2[i * q + k];
                        const float* gr = g + i * r;
                        for (std::size_t j = 0; j < r; ++j) grow[j] += aik * gr[j];
                    }
                }
                add_into_grad(bc, gb);
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor transpose(const Tensor& a, Tape* tape) {
    if (a.ndim() != 2) throw ShapeError("transpose expects a matrix, got " + shape_str(a.dims()));
    const std::size_t p = a.dim(0), q = a.dim(1);
    Tensor out(Shape{q, p});
    const float* pa = a.data();
    float* po = out.data();
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) po[j * p + i] = pa[i * q + j];
    if (taped(tape, {&a})) {
        Tensor ac = a, oc = out;
        tape->record("transpose", out, [ac, oc, p, q]() mutable {
            ac.ensure_grad();
            float* ga = ac.grad_data();
            const float* g = oc.grad_data();
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < q; ++j) ga[i * q + j] += g[j * p + i];
        });
        mark(out, tape);
    }
    return out;
}

Tensor softmax_columns(const Tensor& x, Tape* tape) {
    if (x.ndim() != 2) throw ShapeError("softmax_columns expects a matrix, got " + shape_str(x.dims()));
    const std::size_t p = x.dim(0), q = x.dim(1);
    const float* px = x.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(px[i])) throw NumericError("softmax_columns: NaN input");
    }
    Tensor out(x.dims());
    float* po = out.data();
    for (std::size_t j = 0; j < q; ++j) {
        float m = px[j];
        for (std::size_t i = 1; i < p; ++i) m = std::max(m, px[i * q + j]);
        double sum = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            const double e = std::exp(double(px[i * q + j]) - double(m));
            po[i * q + j] = float(e);
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (std::size_t i = 0; i < p; ++i) po[i * q + j] = float(po[i * q + j] * inv);
    }
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("softmax_columns", out, [xc, oc, p, q]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float* g = oc.grad_data();
            const float* y = oc.data();
            for (std::size_t j = 0; j < q; ++j) {
                double dot = 0.0;
                for (std::size_t i = 0; i < p; ++i) dot += double(g[i * q + j]) * y[i * q + j];
                for (std::size_t i = 0; i < p; ++i) {
                    gx[i * q + j] += float(double(y[i * q + j]) * (double(g[i * q + j]) - dot));
                }
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor add_col_bias(const Tensor& x, const Tensor& b, Tape* tape) {
    if (x.ndim() != 2 || b.ndim() != 1 || b.dim(0) != x.dim(0)) {
        throw ShapeError("add_col_bias: x " + shape_str(x.dims()) + " with bias " + shape_str(b.dims()));
    }
    const std::size_t p = x.dim(0), q = x.dim(1);
    Tensor out(x.dims());
    const float* px = x.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) po[i * q + j] = px[i * q + j] + pb[i];
    if (taped(tape, {&x, &b})) {
        Tensor xc = x, bc = b, oc = out;
        tape->record("add_col_bias", out, [xc, bc, oc, p, q]() mutable {
            const float* g = oc.grad_data();
            if (xc.requires_grad()) {
                xc.ensure_grad();
                float* gx = xc.grad_data();
                for (std::size_t i = 0; i < oc.size(); ++i) gx[i] += g[i];
            }
            if (bc.requires_grad()) {
                std::vector<double> gb(p, 0.0);
                for (std::size_t i = 0; i < p; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < q; ++j) s += g[i * q + j];
                    gb[i] = s;
                }
                add_into_grad(bc, gb);
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape dims, Tape* tape) {
    if (numel(dims) != x.size()) {
        throw ShapeError("reshape " + shape_str(x.dims()) + " -> " + shape_str(dims) +
                         " changes element count");
    }
    Tensor out = Tensor::from(std::move(dims), x.vec());
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("reshape", out, [xc, oc]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float* g = oc.grad_data();
            for (std::size_t i = 0; i < oc.size(); ++i) gx[i] += g[i];
        });
        mark(out, tape);
    }
    return out;
}

Tensor layer_norm(const Tensor& x, int axis, const Tensor& gain, const Tensor& shift, float eps,
                  Tape* tape) {
    if (axis < 0 || std::size_t(axis) >= x.ndim()) {
        throw ShapeError("layer_norm axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.dims()));
    }
    const std::size_t c = x.dim(std::size_t(axis));
    if (gain.size() != c || shift.size() != c) {
        throw ShapeError("layer_norm gain/shift must have length " + std::to_string(c));
    }
    if (c == 1 && eps == 0.0f) throw NumericError("layer_norm over a single channel with eps 0");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < std::size_t(axis); ++i) outer *= x.dim(i);
    for (std::size_t i = std::size_t(axis) + 1; i < x.ndim(); ++i) inner *= x.dim(i);

    Tensor out(x.dims());
    const float* px = x.data();
    const float* pg = gain.data();
    const float* ps = shift.data();
    float* po = out.data();
    // invstd per location is saved for the backward pass
    std::vector<float> invstd;
    const bool want_tape = taped(tape, {&x, &gain, &shift});
    if (want_tape) invstd.resize(outer * inner);

    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * c * inner + in;
            double mean = 0.0;
            for (std::size_t k = 0; k < c; ++k) mean += px[base + k * inner];
            mean /= double(c);
            double var = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                const double d = px[base + k * inner] - mean;
                var += d * d;
            }
            var /= double(c);
            const double istd = 1.0 / std::sqrt(var + double(eps));
            if (want_tape) invstd[o * inner + in] = float(istd);
            for (std::size_t k = 0; k < c; ++k) {
                const double xh = (px[base + k * inner] - mean) * istd;
                po[base + k * inner] = float(xh * pg[k] + ps[k]);
            }
        }
    }
    if (want_tape) {
        Tensor xc = x, gc = gain, sc = shift, oc = out;
        auto saved = std::make_shared<std::vector<float>>(std::move(invstd));
        tape->record("layer_norm", out, [xc, gc, sc, oc, saved, axis, outer, inner, c]() mutable {
            const float* g = oc.grad_data();
            const float* px2 = xc.data();
            const float* pg2 = gc.data();
            const float* istds = saved->data();
            std::vector<double> dgain(c, 0.0), dshift(c, 0.0);
            const bool want_x = xc.requires_grad();
            if (want_x) xc.ensure_grad();
            float* gx = want_x ? xc.grad_data() : nullptr;
            std::vector<double> xh(c), dxh(c);
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * c * inner + in;
                    const double istd = istds[o * inner + in];
                    double mean = 0.0;
                    for (std::size_t k = 0; k < c; ++k) mean += px2[base + k * inner];
                    mean /= double(c);
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t k = 0; k < c; ++k) {
                        xh[k] = (px2[base + k * inner] - mean) * istd;
                        const double gy = g[base + k * inner];
                        dxh[k] = gy * pg2[k];
                        dgain[k] += gy * xh[k];
                        dshift[k] += gy;
                        m1 += dxh[k];
                        m2 += dxh[k] * xh[k];
                    }
                    if (want_x) {
                        m1 /= double(c);
                        m2 /= double(c);
                        for (std::size_t k = 0; k < c; ++k) {
                            gx[base + k * inner] += float((dxh[k] - m1 - xh[k] * m2) * istd);
                        }
                    }
                }
            }
            if (gc.requires_grad()) add_into_grad(gc, dgain);
            if (sc.requires_grad()) add_into_grad(sc, dshift);
        });
        mark(out, tape);
    }
    return out;
}

namespace {

struct ConvDims {
    std::size_t t, ci, h, w;
    std::size_t co, kh, kw;
    std::size_t oh, ow;
    bool batched;
};

ConvDims conv_dims(const Tensor& x, const Tensor& weight, int stride, int padding) {
    if (weight.ndim() != 4) throw ShapeError("conv2d weight must be 4D, got " + shape_str(weight.dims()));
    if (x.ndim() != 3 && x.ndim() != 4) {
        throw ShapeError("conv2d input must be [C,H,W] or [T,C,H,W], got " + shape_str(x.dims()));
    }
    ConvDims d{};
    d.batched = x.ndim() == 4;
    d.t = d.batched ? x.dim(0) : 1;
    d.ci = x.dim(d.batched ? 1 : 0);
    d.h = x.dim(d.batched ? 2 : 1);
    d.w = x.dim(d.batched ? 3 : 2);
    d.co = weight.dim(0);
    d.kh = weight.dim(2);
    d.kw = weight.dim(3);
    if (weight.dim(1) != d.ci) {
        throw ShapeError("conv2d channel mismatch: input " + shape_str(x.dims()) + " vs weight " +
                         shape_str(weight.dims()));
    }
    if (d.kh % 2 == 0 || d.kw % 2 == 0) throw ShapeError("conv2d kernel extents must be odd");
    if (stride < 1 || padding < 0) throw ShapeError("conv2d: bad stride/padding");
    if (d.h + 2 * std::size_t(padding) < d.kh || d.w + 2 * std::size_t(padding) < d.kw) {
        throw ShapeError("conv2d: kernel larger than padded input");
    }
    d.oh = (d.h + 2 * std::size_t(padding) - d.kh) / std::size_t(stride) + 1;
    d.ow = (d.w + 2 * std::size_t(padding) - d.kw) / std::size_t(stride) + 1;
    return d;
}

// ox range such that ix = ox*stride + kx - pad stays within [0, w).
inline void ox_range(std::size_t kx, int stride, int pad, std::size_t w, std::size_t ow,
                     std::size_t& lo, std::size_t& hi) {
    const long s = stride;
    long first = long(pad) - long(kx);
    long lo_l = first <= 0 ? 0 : (first + s - 1) / s;
    long hi_l = (long(w) - 1 + long(pad) - long(kx)) / s;
    if (hi_l > long(ow) - 1) hi_l = long(ow) - 1;
    if (lo_l < 0) lo_l = 0;
    lo = std::size_t(lo_l);
    hi = hi_l < lo_l ? lo - 1 : std::size_t(hi_l); // hi < lo means empty
}

} // namespace

namespace {

// im2col layout: rows indexed by (ci,ky,kx), columns by (oy,ox). Stride-1
// rows are contiguous input copies with zeroed out-of-range edges, which
// keeps every hot loop long and unit-stride.
void im2col_frame(const float* x, float* col, const ConvDims& d, int stride, int pad) {
    const std::size_t n = d.oh * d.ow;
    for (std::size_t ci = 0; ci < d.ci; ++ci) {
        for (std::size_t ky = 0; ky < d.kh; ++ky) {
            for (std::size_t kx = 0; kx < d.kw; ++kx) {
                float* row = col + ((ci * d.kh + ky) * d.kw + kx) * n;
                std::size_t lo, hi;
                ox_range(kx, stride, pad, d.w, d.ow, lo, hi);
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                    const long iy = long(oy) * stride + long(ky) - pad;
                    float* dst = row + oy * d.ow;
                    if (iy < 0 || iy >= long(d.h)) {
                        std::fill(dst, dst + d.ow, 0.0f);
                        continue;
                    }
                    const float* xrow = x + (ci * d.h + std::size_t(iy)) * d.w;
                    if (hi + 1 <= lo) {
                        std::fill(dst, dst + d.ow, 0.0f);
                        continue;
                    }
                    std::fill(dst, dst + lo, 0.0f);
                    const long off = long(kx) - pad;
                    if (stride == 1) {
                        const float* src = xrow + off;
                        std::copy(src + lo, src + hi + 1, dst + lo);
                    } else {
                        for (std::size_t ox = lo; ox <= hi; ++ox) dst[ox] = xrow[long(ox) * stride + off];
                    }
                    std::fill(dst + hi + 1, dst + d.ow, 0.0f);
                }
            }
        }
    }
}

// col2im: transpose of im2col (scatter-add into the input gradient).
void col2im_frame(const float* col, double* gx, const ConvDims& d, int stride, int pad) {
    const std::size_t n = d.oh * d.ow;
    for (std::size_t ci = 0; ci < d.ci; ++ci) {
        for (std::size_t ky = 0; ky < d.kh; ++ky) {
            for (std::size_t kx = 0; kx < d.kw; ++kx) {
                const float* row = col + ((ci * d.kh + ky) * d.kw + kx) * n;
                std::size_t lo, hi;
                ox_range(kx, stride, pad, d.w, d.ow, lo, hi);
                if (hi + 1 <= lo) continue;
                const long off = long(kx) - pad;
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                    const long iy = long(oy) * stride + long(ky) - pad;
                    if (iy < 0 || iy >= long(d.h)) continue;
                    double* gxrow = gx + (ci * d.h + std::size_t(iy)) * d.w;
                    const float* src = row + oy * d.ow;
                    if (stride == 1) {
                        double* g = gxrow + off;
                        for (std::size_t ox = lo; ox <= hi; ++ox) g[ox] += src[ox];
                    } else {
                        for (std::size_t ox = lo; ox <= hi; ++ox) gxrow[long(ox) * stride + off] += src[ox];
                    }
                }
            }
        }
    }
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, int stride, int padding,
              Tape* tape) {
    const ConvDims d = conv_dims(x, weight, stride, padding);
    if (bias && (bias->ndim() != 1 || bias->dim(0) != d.co)) {
        throw ShapeError("conv2d bias must be [Cout], got " + shape_str(bias->dims()));
    }
    Shape out_dims = d.batched ? Shape{d.t, d.co, d.oh, d.ow} : Shape{d.co, d.oh, d.ow};
    Tensor out(out_dims);
    const float* pw = weight.data();
    const float* pb = bias ? bias->data() : nullptr;
    const std::size_t frame_in = d.ci * d.h * d.w;
    const std::size_t frame_out = d.co * d.oh * d.ow;
    const std::size_t n = d.oh * d.ow;
    const std::size_t kk = d.ci * d.kh * d.kw;

    std::vector<float> col(kk * n);
    std::vector<double> acc(n);
    for (std::size_t t = 0; t < d.t; ++t) {
        im2col_frame(x.data() + t * frame_in, col.data(), d, stride, padding);
        float* po = out.data() + t * frame_out;
        for (std::size_t co = 0; co < d.co; ++co) {
            std::fill(acc.begin(), acc.end(), pb ? double(pb[co]) : 0.0);
            const float* wrow = pw + co * kk;
            for (std::size_t k = 0; k < kk; ++k) {
                const double wv = wrow[k];
                if (wv == 0.0) continue;
                const float* crow = col.data() + k * n;
                for (std::size_t i = 0; i < n; ++i) acc[i] += wv * crow[i];
            }
            float* orow = po + co * n;
            for (std::size_t i = 0; i < n; ++i) orow[i] = float(acc[i]);
        }
    }

    const Tensor* bias_in = bias;
    if (taped(tape, {&x, &weight, bias_in})) {
        Tensor xc = x, wc = weight, oc = out;
        Tensor bc = bias ? *bias : Tensor();
        tape->record("conv2d", out, [xc, wc, bc, oc, d, stride, padding]() mutable {
            const float* pw2 = wc.data();
            const std::size_t frame_in = d.ci * d.h * d.w;
            const std::size_t frame_out = d.co * d.oh * d.ow;
            const std::size_t n = d.oh * d.ow;
            const std::size_t kk = d.ci * d.kh * d.kw;
            const bool want_x = xc.requires_grad();
            const bool want_w = wc.requires_grad();
            const bool want_b = bc.defined() && bc.requires_grad();
            std::vector<double> gw(want_w ? wc.size() : 0, 0.0);
            std::vector<double> gb(want_b ? d.co : 0, 0.0);
            std::vector<float> col((want_w || want_x) ? kk * n : 0);
            std::vector<float> gcol(want_x ? kk * n : 0);
            std::vector<double> gx_frame(want_x ? frame_in : 0);
            std::vector<double> acc(n);
            if (want_x) xc.ensure_grad();

            for (std::size_t t = 0; t < d.t; ++t) {
                const float* pg = oc.grad_data() + t * frame_out;
                if (want_w || want_x) {
                    im2col_frame(xc.data() + t * frame_in, col.data(), d, stride, padding);
                }
                if (want_b) {
                    for (std::size_t co = 0; co < d.co; ++co) {
                        const float* grow = pg + co * n;
                        double s0 = 0.0, s1 = 0.0;
                        std::size_t i = 0;
                        for (; i + 1 < n; i += 2) {
                            s0 += grow[i];
                            s1 += grow[i + 1];
                        }
                        if (i < n) s0 += grow[i];
                        gb[co] += s0 + s1;
                    }
                }
                if (want_w) {
                    for (std::size_t co = 0; co < d.co; ++co) {
                        const float* grow = pg + co * n;
                        double* gwrow = gw.data() + co * kk;
                        for (std::size_t k = 0; k < kk; ++k) {
                            const float* crow = col.data() + k * n;
                            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                            std::size_t i = 0;
                            for (; i + 3 < n; i += 4) {
                                s0 += double(grow[i]) * crow[i];
                                s1 += double(grow[i + 1]) * crow[i + 1];
                                s2 += double(grow[i + 2]) * crow[i + 2];
                                s3 += double(grow[i + 3]) * crow[i + 3];
                            }
                            for (; i < n; ++i) s0 += double(grow[i]) * crow[i];
                            gwrow[k] += s0 + s1 + s2 + s3;
                        }
                    }
                }
                if (want_x) {
                    // gcol = W^T gout, then col2im
                    for (std::size_t k = 0; k < kk; ++k) {
                        std::fill(acc.begin(), acc.end(), 0.0);
                        for (std::size_t co = 0; co < d.co; ++co) {
                            const double wv = pw2[co * kk + k];
                            if (wv == 0.0) continue;
                            const float* grow = pg + co * n;
                            for (std::size_t i = 0; i < n; ++i) acc[i] += wv * grow[i];
                        }
                        float* gcrow = gcol.data() + k * n;
                        for (std::size_t i = 0; i < n; ++i) gcrow[i] = float(acc[i]);
                    }
                    std::fill(gx_frame.begin(), gx_frame.end(), 0.0);
                    col2im_frame(gcol.data(), gx_frame.data(), d, stride, padding);
                    float* gx = xc.grad_data() + t * frame_in;
                    for (std::size_t i = 0; i < frame_in; ++i) gx[i] += float(gx_frame[i]);
                }
            }
            if (want_w) add_into_grad(wc, gw);
            if (want_b) add_into_grad(bc, gb);
        });
        mark(out, tape);
    }
    return out;
}

Tensor unfold(const Tensor& x, int patch_w, int patch_h, int stride, Tape* tape) {
    if (x.ndim() != 4) throw ShapeError("unfold expects [T,C,H,W], got " + shape_str(x.dims()));
    const std::size_t t = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (patch_h <= 0 || patch_w <= 0 || stride <= 0) throw ShapeError("unfold: bad patch/stride");
    if (std::size_t(patch_h) > h || std::size_t(patch_w) > w) {
        throw ShapeError("unfold: patch " + std::to_string(patch_w) + "x" + std::to_string(patch_h) +
                         " larger than frame " + shape_str(x.dims()));
    }
    if ((h - patch_h) % stride != 0 || (w - patch_w) % stride != 0) {
        throw ShapeError("unfold: frame does not tile with patch/stride");
    }
    const std::size_t gh = (h - patch_h) / stride + 1;
    const std::size_t gw = (w - patch_w) / stride + 1;
    const std::size_t nt = gh * gw;
    Tensor out(Shape{t * nt, c, std::size_t(patch_h), std::size_t(patch_w)});
    const float* px = x.data();
    float* po = out.data();
    for (std::size_t ti = 0; ti < t; ++ti) {
        for (std::size_t gy = 0; gy < gh; ++gy) {
            for (std::size_t gx = 0; gx < gw; ++gx) {
                const std::size_t p = ti * nt + gy * gw + gx;
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t dy = 0; dy < std::size_t(patch_h); ++dy) {
                        const float* src =
                            px + ((ti * c + ci) * h + gy * stride + dy) * w + gx * stride;
                        float* dst = po + ((p * c + ci) * patch_h + dy) * patch_w;
                        std::copy(src, src + patch_w, dst);
                    }
                }
            }
        }
    }
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("unfold", out, [xc, oc, t, c, h, w, patch_h, patch_w, stride, gh, gw, nt]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float* g = oc.grad_data();
            for (std::size_t ti = 0; ti < t; ++ti) {
                for (std::size_t gy = 0; gy < gh; ++gy) {
                    for (std::size_t gxi = 0; gxi < gw; ++gxi) {
                        const std::size_t p = ti * nt + gy * gw + gxi;
                        for (std::size_t ci = 0; ci < c; ++ci) {
                            for (std::size_t dy = 0; dy < std::size_t(patch_h); ++dy) {
                                float* dst =
                                    gx + ((ti * c + ci) * h + gy * stride + dy) * w + gxi * stride;
                                const float* src = g + ((p * c + ci) * patch_h + dy) * patch_w;
                                for (int dx = 0; dx < patch_w; ++dx) dst[dx] += src[dx];
                            }
                        }
                    }
                }
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor fold(const Tensor& patches, int t, int c, int h, int w, int stride, Tape* tape) {
    if (patches.ndim() != 4) throw ShapeError("fold expects [N,C,Hp,Wp], got " + shape_str(patches.dims()));
    const std::size_t n = patches.dim(0);
    const std::size_t pc = patches.dim(1);
    const std::size_t ph = patches.dim(2);
    const std::size_t pw = patches.dim(3);
    if (pc != std::size_t(c)) {
        throw ShapeError("fold: channel mismatch " + shape_str(patches.dims()) + " vs C=" + std::to_string(c));
    }
    if (ph > std::size_t(h) || pw > std::size_t(w) || stride <= 0 || (h - int(ph)) % stride != 0 ||
        (w - int(pw)) % stride != 0) {
        throw ShapeError("fold: patches do not tile the output map");
    }
    const std::size_t gh = std::size_t((h - int(ph)) / stride + 1);
    const std::size_t gw = std::size_t((w - int(pw)) / stride + 1);
    const std::size_t nt = gh * gw;
    if (n != std::size_t(t) * nt) {
        throw ShapeError("fold: inconsistent patch count " + std::to_string(n) + ", expected " +
                         std::to_string(std::size_t(t) * nt));
    }
    // per-pixel contribution counts (same for every frame/channel)
    std::vector<float> count(std::size_t(h) * w, 0.0f);
    for (std::size_t gy = 0; gy < gh; ++gy)
        for (std::size_t gx = 0; gx < gw; ++gx)
            for (std::size_t dy = 0; dy < ph; ++dy)
                for (std::size_t dx = 0; dx < pw; ++dx)
                    count[(gy * stride + dy) * w + gx * stride + dx] += 1.0f;

    Tensor out(Shape{std::size_t(t), std::size_t(c), std::size_t(h), std::size_t(w)});
    const float* pp = patches.data();
    float* po = out.data();
    std::vector<double> acc(std::size_t(h) * w);
    for (std::size_t ti = 0; ti < std::size_t(t); ++ti) {
        for (std::size_t ci = 0; ci < std::size_t(c); ++ci) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t gy = 0; gy < gh; ++gy) {
                for (std::size_t gx = 0; gx < gw; ++gx) {
                    const std::size_t p = ti * nt + gy * gw + gx;
                    for (std::size_t dy = 0; dy < ph; ++dy) {
                        const float* src = pp + ((p * c + ci) * ph + dy) * pw;
                        double* dst = acc.data() + (gy * stride + dy) * w + gx * stride;
                        for (std::size_t dx = 0; dx < pw; ++dx) dst[dx] += src[dx];
                    }
                }
            }
            float* dst = po + (ti * c + ci) * std::size_t(h) * w;
            for (std::size_t i = 0; i < acc.size(); ++i) dst[i] = float(acc[i] / count[i]);
        }
    }
    if (taped(tape, {&patches})) {
        Tensor xc = patches, oc = out;
        auto counts = std::make_shared<std::vector<float>>(std::move(count));
        tape->record("fold", out, [xc, oc, counts, t, c, h, w, ph, pw, stride, gh, gw, nt]() mutable {
            xc.ensure_grad();
            float* gp = xc.grad_data();
            const float* g = oc.grad_data();
            for (std::size_t ti = 0; ti < std::size_t(t); ++ti) {
                for (std::size_t ci = 0; ci < std::size_t(c); ++ci) {
                    const float* grow = g + (ti * c + ci) * std::size_t(h) * w;
                    for (std::size_t gy = 0; gy < gh; ++gy) {
                        for (std::size_t gx = 0; gx < gw; ++gx) {
                            const std::size_t p = ti * nt + gy * gw + gx;
                            for (std::size_t dy = 0; dy < ph; ++dy) {
                                float* dst = gp + ((p * c + ci) * ph + dy) * pw;
                                const std::size_t base = (gy * stride + dy) * w + gx * stride;
                                for (std::size_t dx = 0; dx < pw; ++dx) {
                                    dst[dx] += grow[base + dx] / (*counts)[base + dx];
                                }
                            }
                        }
                    }
                }
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor pixel_shuffle(const Tensor& x, int r, Tape* tape) {
    if (r <= 0) throw ShapeError("pixel_shuffle: bad factor");
    if (x.ndim() != 3 && x.ndim() != 4) {
        throw ShapeError("pixel_shuffle expects [C,H,W] or [T,C,H,W], got " + shape_str(x.dims()));
    }
    const bool batched = x.ndim() == 4;
    const std::size_t t = batched ? x.dim(0) : 1;
    const std::size_t cin = x.dim(batched ? 1 : 0);
    const std::size_t h = x.dim(batched ? 2 : 1);
    const std::size_t w = x.dim(batched ? 3 : 2);
    const std::size_t rr = std::size_t(r) * std::size_t(r);
    if (cin % rr != 0) {
        throw ShapeError("pixel_shuffle: channels " + std::to_string(cin) + " not divisible by r^2=" +
                         std::to_string(rr));
    }
    const std::size_t cout = cin / rr;
    Shape od = batched ? Shape{t, cout, h * r, w * r} : Shape{cout, h * r, w * r};
    Tensor out(od);
    const float* px = x.data();
    float* po = out.data();
    const std::size_t fin = cin * h * w, fout = cout * h * r * w * r;
    for (std::size_t ti = 0; ti < t; ++ti) {
        for (std::size_t c = 0; c < cout; ++c) {
            for (std::size_t i = 0; i < std::size_t(r); ++i) {
                for (std::size_t j = 0; j < std::size_t(r); ++j) {
                    const float* src = px + ti * fin + (c * rr + i * r + j) * h * w;
                    for (std::size_t y = 0; y < h; ++y) {
                        float* dst = po + ti * fout + (c * h * r + y * r + i) * w * r + j;
                        for (std::size_t xi = 0; xi < w; ++xi) dst[xi * r] = src[y * w + xi];
                    }
                }
            }
        }
    }
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("pixel_shuffle", out, [xc, oc, t, cout, rr, r, h, w, fin, fout]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float* g = oc.grad_data();
            for (std::size_t ti = 0; ti < t; ++ti) {
                for (std::size_t c = 0; c < cout; ++c) {
                    for (std::size_t i = 0; i < std::size_t(r); ++i) {
                        for (std::size_t j = 0; j < std::size_t(r); ++j) {
                            float* dst = gx + ti * fin + (c * rr + i * r + j) * h * w;
                            for (std::size_t y = 0; y < h; ++y) {
                                const float* src = g + ti * fout + (c * h * r + y * r + i) * w * r + j;
                                for (std::size_t xi = 0; xi < w; ++xi) dst[y * w + xi] += src[xi * r];
                            }
                        }
                    }
                }
            }
        });
        mark(out, tape);
    }
    return out;
}

namespace {

struct WarpDims {
    std::size_t t, c, h, w;
    bool batched;
};

WarpDims warp_dims(const Tensor& x, const Tensor& flow) {
    WarpDims d{};
    if (x.ndim() == 3 && flow.ndim() == 3) {
        d.batched = false;
        d.t = 1;
        d.c = x.dim(0);
        d.h = x.dim(1);
        d.w = x.dim(2);
        if (flow.dim(0) != 2 || flow.dim(1) != d.h || flow.dim(2) != d.w) {
            throw ShapeError("bilinear_warp: flow " + shape_str(flow.dims()) + " does not match " +
                             shape_str(x.dims()));
        }
    } else if (x.ndim() == 4 && flow.ndim() == 4) {
        d.batched = true;
        d.t = x.dim(0);
        d.c = x.dim(1);
        d.h = x.dim(2);
        d.w = x.dim(3);
        if (flow.dim(0) != d.t || flow.dim(1) != 2 || flow.dim(2) != d.h || flow.dim(3) != d.w) {
            throw ShapeError("bilinear_warp: flow " + shape_str(flow.dims()) + " does not match " +
                             shape_str(x.dims()));
        }
    } else {
        throw ShapeError("bilinear_warp: bad ranks " + shape_str(x.dims()) + " / " + shape_str(flow.dims()));
    }
    return d;
}

} // namespace

Tensor bilinear_warp(const Tensor& x, const Tensor& flow, Tape* tape) {
    const WarpDims d = warp_dims(x, flow);
    Tensor out(x.dims());
    const std::size_t plane = d.h * d.w;
    const std::size_t frame = d.c * plane;
    for (std::size_t t = 0; t < d.t; ++t) {
        const float* px = x.data() + t * frame;
        const float* pf = flow.data() + t * 2 * plane;
        float* po = out.data() + t * frame;
        for (std::size_t y = 0; y < d.h; ++y) {
            for (std::size_t xi = 0; xi < d.w; ++xi) {
                const double sx = double(xi) + pf[y * d.w + xi];
                const double sy = double(y) + pf[plane + y * d.w + xi];
                const long x0 = long(std::floor(sx));
                const long y0 = long(std::floor(sy));
                const double wx = sx - double(x0);
                const double wy = sy - double(y0);
                const bool in00 = x0 >= 0 && x0 < long(d.w) && y0 >= 0 && y0 < long(d.h);
                const bool in01 = x0 + 1 >= 0 && x0 + 1 < long(d.w) && y0 >= 0 && y0 < long(d.h);
                const bool in10 = x0 >= 0 && x0 < long(d.w) && y0 + 1 >= 0 && y0 + 1 < long(d.h);
                const bool in11 = x0 + 1 >= 0 && x0 + 1 < long(d.w) && y0 + 1 >= 0 && y0 + 1 < long(d.h);
                const double w00 = (1.0 - wx) * (1.0 - wy);
                const double w01 = wx * (1.0 - wy);
                const double w10 = (1.0 - wx) * wy;
                const double w11 = wx * wy;
                for (std::size_t c = 0; c < d.c; ++c) {
                    const float* pc = px + c * plane;
                    double v = 0.0;
                    if (in00) v += w00 * pc[y0 * long(d.w) + x0];
                    if (in01) v += w01 * pc[y0 * long(d.w) + x0 + 1];
                    if (in10) v += w10 * pc[(y0 + 1) * long(d.w) + x0];
                    if (in11) v += w11 * pc[(y0 + 1) * long(d.w) + x0 + 1];
                    po[c * plane + y * d.w + xi] = float(v);
                }
            }
        }
    }
    if (taped(tape, {&x, &flow})) {
        Tensor xc = x, fc = flow, oc = out;
        tape->record("bilinear_warp", out, [xc, fc, oc, d, plane, frame]() mutable {
            const bool want_x = xc.requires_grad();
            const bool want_f = fc.requires_grad();
            if (want_x) xc.ensure_grad();
            if (want_f) fc.ensure_grad();
            for (std::size_t t = 0; t < d.t; ++t) {
                const float* px = xc.data() + t * frame;
                const float* pf = fc.data() + t * 2 * plane;
                const float* g = oc.grad_data() + t * frame;
                float* gx = want_x ? xc.grad_data() + t * frame : nullptr;
                float* gf = want_f ? fc.grad_data() + t * 2 * plane : nullptr;
                for (std::size_t y = 0; y < d.h; ++y) {
                    for (std::size_t xi = 0; xi < d.w; ++xi) {
                        const double sx = double(xi) + pf[y * d.w + xi];
                        const double sy = double(y) + pf[plane + y * d.w + xi];
                        const long x0 = long(std::floor(sx));
                        const long y0 = long(std::floor(sy));
                        const double wx = sx - double(x0);
                        const double wy = sy - double(y0);
                        const bool in00 = x0 >= 0 && x0 < long(d.w) && y0 >= 0 && y0 < long(d.h);
                        const bool in01 = x0 + 1 >= 0 && x0 + 1 < long(d.w) && y0 >= 0 && y0 < long(d.h);
                        const bool in10 = x0 >= 0 && x0 < long(d.w) && y0 + 1 >= 0 && y0 + 1 < long(d.h);
                        const bool in11 =
                            x0 + 1 >= 0 && x0 + 1 < long(d.w) && y0 + 1 >= 0 && y0 + 1 < long(d.h);
                        double dsx = 0.0, dsy = 0.0;
                        for (std::size_t c = 0; c < d.c; ++c) {
                            const float* pc = px + c * plane;
                            const double go = g[c * plane + y * d.w + xi];
                            if (go == 0.0) continue;
                            const double v00 = in00 ? pc[y0 * long(d.w) + x0] : 0.0;
                            const double v01 = in01 ? pc[y0 * long(d.w) + x0 + 1] : 0.0;
                            const double v10 = in10 ? pc[(y0 + 1) * long(d.w) + x0] : 0.0;
                            const double v11 = in11 ? pc[(y0 + 1) * long(d.w) + x0 + 1] : 0.0;
                            if (want_x) {
                                float* gc = gx + c * plane;
                                if (in00) gc[y0 * long(d.w) + x0] += float(go * (1.0 - wx) * (1.0 - wy));
                                if (in01) gc[y0 * long(d.w) + x0 + 1] += float(go * wx * (1.0 - wy));
                                if (in10) gc[(y0 + 1) * long(d.w) + x0] += float(go * (1.0 - wx) * wy);
                                if (in11) gc[(y0 + 1) * long(d.w) + x0 + 1] += float(go * wx * wy);
                            }
                            if (want_f) {
                                dsx += go * ((v01 - v00) * (1.0 - wy) + (v11 - v10) * wy);
                                dsy += go * ((v10 - v00) * (1.0 - wx) + (v11 - v01) * wx);
                            }
                        }
                        if (want_f) {
                            gf[y * d.w + xi] += float(dsx);
                            gf[plane + y * d.w + xi] += float(dsy);
                        }
                    }
                }
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b, Tape* tape) {
    if (a.ndim() != b.ndim() || (a.ndim() != 3 && a.ndim() != 4)) {
        throw ShapeError("concat_channels: bad ranks " + shape_str(a.dims()) + " / " + shape_str(b.dims()));
    }
    const bool batched = a.ndim() == 4;
    const std::size_t t = batched ? a.dim(0) : 1;
    const std::size_t ca = a.dim(batched ? 1 : 0), cb = b.dim(batched ? 1 : 0);
    const std::size_t h = a.dim(batched ? 2 : 1), w = a.dim(batched ? 3 : 2);
    if ((batched && b.dim(0) != t) || b.dim(batched ? 2 : 1) != h || b.dim(batched ? 3 : 2) != w) {
        throw ShapeError("concat_channels: spatial mismatch " + shape_str(a.dims()) + " vs " +
                         shape_str(b.dims()));
    }
    Shape od = batched ? Shape{t, ca + cb, h, w} : Shape{ca + cb, h, w};
    Tensor out(od);
    const std::size_t plane = h * w;
    for (std::size_t ti = 0; ti < t; ++ti) {
        float* po = out.data() + ti * (ca + cb) * plane;
        std::copy(a.data() + ti * ca * plane, a.data() + (ti + 1) * ca * plane, po);
        std::copy(b.data() + ti * cb * plane, b.data() + (ti + 1) * cb * plane, po + ca * plane);
    }
    if (taped(tape, {&a, &b})) {
        Tensor ac = a, bc = b, oc = out;
        tape->record("concat_channels", out, [ac, bc, oc, t, ca, cb, plane]() mutable {
            const float* g = oc.grad_data();
            if (ac.requires_grad()) {
                ac.ensure_grad();
                float* ga = ac.grad_data();
                for (std::size_t ti = 0; ti < t; ++ti) {
                    const float* src = g + ti * (ca + cb) * plane;
                    for (std::size_t i = 0; i < ca * plane; ++i) ga[ti * ca * plane + i] += src[i];
                }
            }
            if (bc.requires_grad()) {
                bc.ensure_grad();
                float* gb = bc.grad_data();
                for (std::size_t ti = 0; ti < t; ++ti) {
                    const float* src = g + ti * (ca + cb) * plane + ca * plane;
                    for (std::size_t i = 0; i < cb * plane; ++i) gb[ti * cb * plane + i] += src[i];
                }
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor slice_frame(const Tensor& x, int t, Tape* tape) {
    if (x.ndim() < 2) throw ShapeError("slice_frame expects rank >= 2, got " + shape_str(x.dims()));
    if (t < 0 || std::size_t(t) >= x.dim(0)) throw ShapeError("slice_frame: index out of range");
    Shape od(x.dims().begin() + 1, x.dims().end());
    const std::size_t frame = numel(od);
    Tensor out = Tensor::from(od, std::vector<float>(x.data() + t * frame, x.data() + (t + 1) * frame));
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("slice_frame", out, [xc, oc, t, frame]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data() + std::size_t(t) * frame;
            const float* g = oc.grad_data();
            for (std::size_t i = 0; i < frame; ++i) gx[i] += g[i];
        });
        mark(out, tape);
    }
    return out;
}

Tensor stack_frames(const std::vector<Tensor>& frames, Tape* tape) {
    if (frames.empty()) throw ShapeError("stack_frames: empty list");
    const Shape& fd = frames[0].dims();
    for (const auto& f : frames) {
        if (f.dims() != fd) throw ShapeError("stack_frames: shape mismatch");
    }
    Shape od;
    od.push_back(frames.size());
    od.insert(od.end(), fd.begin(), fd.end());
    Tensor out(od);
    const std::size_t frame = numel(fd);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        std::copy(frames[i].data(), frames[i].data() + frame, out.data() + i * frame);
    }
    bool any = false;
    for (const auto& f : frames) any = any || f.requires_grad();
    if (tape && any) {
        std::vector<Tensor> fc = frames;
        Tensor oc = out;
        tape->record("stack_frames", out, [fc, oc, frame]() mutable {
            const float* g = oc.grad_data();
            for (std::size_t i = 0; i < fc.size(); ++i) {
                if (!fc[i].requires_grad()) continue;
                fc[i].ensure_grad();
                float* gf = fc[i].grad_data();
                for (std::size_t k = 0; k < frame; ++k) gf[k] += g[i * frame + k];
            }
        });
        mark(out, tape);
    }
    return out;
}

namespace {

// Half-pixel source taps for 2x upsampling along one axis with border clamp.
struct UpTap {
    std::size_t i0, i1;
    float w0, w1;
};

std::vector<UpTap> up2_taps(std::size_t n) {
    std::vector<UpTap> taps(2 * n);
    for (std::size_t o = 0; o < 2 * n; ++o) {
        const double src = (double(o) + 0.5) / 2.0 - 0.5;
        double fl = std::floor(src);
        long i0 = long(fl);
        const float w1 = float(src - fl);
        long i1 = i0 + 1;
        if (i0 < 0) i0 = 0;
        if (i1 > long(n) - 1) i1 = long(n) - 1;
        taps[o] = {std::size_t(i0), std::size_t(i1), 1.0f - w1, w1};
    }
    return taps;
}

} // namespace

Tensor upsample_bilinear2x(const Tensor& x, Tape* tape) {
    if (x.ndim() != 3 && x.ndim() != 4) {
        throw ShapeError("upsample_bilinear2x expects [C,H,W] or [T,C,H,W]");
    }
    const bool batched = x.ndim() == 4;
    const std::size_t planes = batched ? x.dim(0) * x.dim(1) : x.dim(0);
    const std::size_t h = x.dim(batched ? 2 : 1), w = x.dim(batched ? 3 : 2);
    Shape od = x.dims();
    od[od.size() - 2] = 2 * h;
    od[od.size() - 1] = 2 * w;
    Tensor out(od);
    const auto ty = up2_taps(h);
    const auto tx = up2_taps(w);
    const float* px = x.data();
    float* po = out.data();
    for (std::size_t p = 0; p < planes; ++p) {
        const float* src = px + p * h * w;
        float* dst = po + p * 4 * h * w;
        for (std::size_t oy = 0; oy < 2 * h; ++oy) {
            const auto& a = ty[oy];
            for (std::size_t ox = 0; ox < 2 * w; ++ox) {
                const auto& b = tx[ox];
                const double v = double(a.w0) * (double(b.w0) * src[a.i0 * w + b.i0] +
                                                 double(b.w1) * src[a.i0 * w + b.i1]) +
                                 double(a.w1) * (double(b.w0) * src[a.i1 * w + b.i0] +
                                                 double(b.w1) * src[a.i1 * w + b.i1]);
                dst[oy * 2 * w + ox] = float(v);
            }
        }
    }
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        auto tys = std::make_shared<std::vector<UpTap>>(ty);
        auto txs = std::make_shared<std::vector<UpTap>>(tx);
        tape->record("upsample_bilinear2x", out, [xc, oc, tys, txs, planes, h, w]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float* g = oc.grad_data();
            for (std::size_t p = 0; p < planes; ++p) {
                float* dst = gx + p * h * w;
                const float* src = g + p * 4 * h * w;
                for (std::size_t oy = 0; oy < 2 * h; ++oy) {
                    const auto& a = (*tys)[oy];
                    for (std::size_t ox = 0; ox < 2 * w; ++ox) {
                        const auto& b = (*txs)[ox];
                        const float go = src[oy * 2 * w + ox];
                        dst[a.i0 * w + b.i0] += a.w0 * b.w0 * go;
                        dst[a.i0 * w + b.i1] += a.w0 * b.w1 * go;
                        dst[a.i1 * w + b.i0] += a.w1 * b.w0 * go;
                        dst[a.i1 * w + b.i1] += a.w1 * b.w1 * go;
                    }
                }
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor downsample2x_avg(const Tensor& x, Tape* tape) {
    if (x.ndim() != 3 && x.ndim() != 4) {
        throw ShapeError("downsample2x_avg expects [C,H,W] or [T,C,H,W]");
    }
    const bool batched = x.ndim() == 4;
    const std::size_t planes = batched ? x.dim(0) * x.dim(1) : x.dim(0);
    const std::size_t h = x.dim(batched ? 2 : 1), w = x.dim(batched ? 3 : 2);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("downsample2x_avg: odd spatial extents");
    Shape od = x.dims();
    od[od.size() - 2] = h / 2;
    od[od.size() - 1] = w / 2;
    Tensor out(od);
    const float* px = x.data();
    float* po = out.data();
    for (std::size_t p = 0; p < planes; ++p) {
        const float* src = px + p * h * w;
        float* dst = po + p * (h / 2) * (w / 2);
        for (std::size_t y = 0; y < h / 2; ++y) {
            for (std::size_t xi = 0; xi < w / 2; ++xi) {
                const double v = (double(src[2 * y * w + 2 * xi]) + src[2 * y * w + 2 * xi + 1] +
                                  src[(2 * y + 1) * w + 2 * xi] + src[(2 * y + 1) * w + 2 * xi + 1]) *
                                 0.25;
                dst[y * (w / 2) + xi] = float(v);
            }
        }
    }
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("downsample2x_avg", out, [xc, oc, planes, h, w]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float* g = oc.grad_data();
            for (std::size_t p = 0; p < planes; ++p) {
                float* dst = gx + p * h * w;
                const float* src = g + p * (h / 2) * (w / 2);
                for (std::size_t y = 0; y < h / 2; ++y) {
                    for (std::size_t xi = 0; xi < w / 2; ++xi) {
                        const float go = src[y * (w / 2) + xi] * 0.25f;
                        dst[2 * y * w + 2 * xi] += go;
                        dst[2 * y * w + 2 * xi + 1] += go;
                        dst[(2 * y + 1) * w + 2 * xi] += go;
                        dst[(2 * y + 1) * w + 2 * xi + 1] += go;
                    }
                }
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor upsample_bilinear(const Tensor& x, int factor, Tape* tape) {
    if (factor < 1 || (factor & (factor - 1)) != 0) {
        throw ConfigError("upsample factor must be a power of two, got " + std::to_string(factor));
    }
    Tensor cur = x;
    for (int f = factor; f > 1; f /= 2) cur = upsample_bilinear2x(cur, tape);
    return cur;
}

Tensor sum_all(const Tensor& x, Tape* tape) {
    const double s64 = sum_all_f64(x);
    Tensor out = Tensor::scalar(float(s64));
    out.set_scalar_f64(s64);
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("sum_all", out, [xc, oc]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float g = oc.grad_data()[0];
            for (std::size_t i = 0; i < xc.size(); ++i) gx[i] += g;
        });
        mark(out, tape);
    }
    return out;
}

Tensor mean_all(const Tensor& x, Tape* tape) {
    const double n = double(x.size());
    const double s64 = sum_all_f64(x) / n;
    Tensor out = Tensor::scalar(float(s64));
    out.set_scalar_f64(s64);
    if (taped(tape, {&x})) {
        Tensor xc = x, oc = out;
        tape->record("mean_all", out, [xc, oc, n]() mutable {
            xc.ensure_grad();
            float* gx = xc.grad_data();
            const float g = float(oc.grad_data()[0] / n);
            for (std::size_t i = 0; i < xc.size(); ++i) gx[i] += g;
        });
        mark(out, tape);
    }
    return out;
}

Tensor charbonnier(const Tensor& pred, const Tensor& target, float eps, Tape* tape) {
    check_same_shape(pred, target, "charbonnier");
    const double e2 = double(eps) * double(eps);
    const float* pp = pred.data();
    const float* pt = target.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = double(pp[i]) - double(pt[i]);
        sum += std::sqrt(d * d + e2);
    }
    const double n = double(pred.size());
    Tensor out = Tensor::scalar(float(sum / n));
    out.set_scalar_f64(sum / n);
    if (taped(tape, {&pred, &target})) {
        Tensor pc = pred, tc = target, oc = out;
        tape->record("charbonnier", out, [pc, tc, oc, e2, n]() mutable {
            const double g = oc.grad_data()[0];
            const float* pp2 = pc.data();
            const float* pt2 = tc.data();
            const bool want_p = pc.requires_grad();
            const bool want_t = tc.requires_grad();
            if (want_p) pc.ensure_grad();
            if (want_t) tc.ensure_grad();
            for (std::size_t i = 0; i < pc.size(); ++i) {
                const double d = double(pp2[i]) - double(pt2[i]);
                const double gi = g * d / (std::sqrt(d * d + e2) * n);
                if (want_p) pc.grad_data()[i] += float(gi);
                if (want_t) tc.grad_data()[i] -= float(gi);
            }
        });
        mark(out, tape);
    }
    return out;
}

Tensor clamp01(const Tensor& x) {
    Tensor out(x.dims());
    const float* px = x.data();
    float* po = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) po[i] = std::min(1.0f, std::max(0.0f, px[i]));
    return out;
}

double sum_all_f64(const Tensor& x) {
    double s = 0.0;
    const float* px = x.data();
    for (std::size_t i = 0; i < x.size(); ++i) s += px[i];
    return s;
}

bool all_finite(const Tensor& x) {
    const float* px = x.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(px[i])) return false;
    }
    return true;
}

} // namespace vsrt::ops
