#pragma once

#include <vector>

#include "vsrt/tape.hpp"
#include "vsrt/tensor.hpp"

namespace vsrt::ops {

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor scale(const Tensor& a, float c, Tape* tape = nullptr);
Tensor relu(const Tensor& x, Tape* tape = nullptr);
Tensor leaky_relu(const Tensor& x, float slope, Tape* tape = nullptr);

// Matrix ops on [p,q].
Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor transpose(const Tensor& a, Tape* tape = nullptr);
Tensor softmax_columns(const Tensor& x, Tape* tape = nullptr);
// Adds b[i] to row i of every column of x[r,n] (the "b 1^T" broadcast).
Tensor add_col_bias(const Tensor& x, const Tensor& b, Tape* tape = nullptr);

Tensor reshape(const Tensor& x, Shape dims, Tape* tape = nullptr);

// Normalizes over `axis` at every other-location, then applies gain/shift
// (both of length dims[axis]).
Tensor layer_norm(const Tensor& x, int axis, const Tensor& gain, const Tensor& shift,
                  float eps, Tape* tape = nullptr);

// 2D convolution, zero padding. x is [Cin,H,W] or batched [T,Cin,H,W];
// weight [Cout,Cin,kH,kW]; optional bias [Cout].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, int stride,
              int padding, Tape* tape = nullptr);

// Sliding-patch extraction on [T,C,H,W] -> [T*Nt, C, Hp, Wp]; patches are
// frame-major then row-major over the patch grid. (H-Hp) and (W-Wp) must be
// divisible by the stride.
Tensor unfold(const Tensor& x, int patch_w, int patch_h, int stride, Tape* tape = nullptr);

// Inverse of unfold onto a [T,C,H,W] map; overlapping contributions are
// averaged (sum divided by per-pixel contribution count).
Tensor fold(const Tensor& patches, int t, int c, int h, int w, int stride,
            Tape* tape = nullptr);

// [C*r*r,H,W] -> [C,rH,rW] (batched form accepted). Channel c*r*r+i*r+j goes
// to output channel c at offset (i,j) of each r x r cell.
Tensor pixel_shuffle(const Tensor& x, int r, Tape* tape = nullptr);

// Samples x at p + flow(p) with bilinear weights; out-of-frame reads zero.
// x [C,H,W] with flow [2,H,W], or batched [T,C,H,W] with [T,2,H,W]. Flow
// channel 0 is horizontal displacement, channel 1 vertical.
Tensor bilinear_warp(const Tensor& x, const Tensor& flow, Tape* tape = nullptr);

// Concat along the channel axis (axis 0 for [C,H,W], axis 1 for [T,C,H,W]).
Tensor concat_channels(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

Tensor slice_frame(const Tensor& x, int t, Tape* tape = nullptr);
Tensor stack_frames(const std::vector<Tensor>& frames, Tape* tape = nullptr);

// Half-pixel bilinear x2 up / 2x2 average down, on [C,H,W] or [T,C,H,W].
Tensor upsample_bilinear2x(const Tensor& x, Tape* tape = nullptr);
Tensor downsample2x_avg(const Tensor& x, Tape* tape = nullptr);
// Repeated x2 upsampling; factor must be a power of two (1 = copy).
Tensor upsample_bilinear(const Tensor& x, int factor, Tape* tape = nullptr);

// Reductions to a scalar tensor (f64 accumulation, f32 result).
Tensor sum_all(const Tensor& x, Tape* tape = nullptr);
Tensor mean_all(const Tensor& x, Tape* tape = nullptr);
// mean(sqrt((pred-target)^2 + eps^2))
Tensor charbonnier(const Tensor& pred, const Tensor& target, float eps, Tape* tape = nullptr);

// Non-differentiable helpers.
Tensor clamp01(const Tensor& x);
double sum_all_f64(const Tensor& x);
bool all_finite(const Tensor& x);

} // namespace vsrt::ops
