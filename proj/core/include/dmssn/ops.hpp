#pragma once

#include "dmssn/autograd.hpp"
#include "dmssn/tensor.hpp"

namespace dmssn::ops {

// All feature maps are HxWxC (see Tensor). Every op records a backward rule
// when any of its inputs requires a gradient.

/// Per-position affine map over the last axis: y = x W^T + b.
/// weight is [out, in]; bias is [out] or undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Dense 2-D convolution (cross-correlation) with zero padding.
/// weight is [out, k, k, in]; bias is [out] or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);

/// Applies one k x k spatial kernel independently to every channel (the
/// same weights for all channels), plus a scalar bias. Stride 1.
Var shared_spatial_conv(const Var& x, const Var& kernel, const Var& bias, int padding);

Var add(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var gelu(const Var& x);
Var sigmoid(const Var& x);

/// Normalizes each position over its channels, then applies gamma/beta.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& x, int begin, int count);

/// Multi-head scaled dot-product attention. q is Hq x Wq x C, k and v are
/// Hk x Wk x C, C divisible by `heads`; every query position attends to all
/// key positions. Output is Hq x Wq x C.
Var attention(const Var& q, const Var& k, const Var& v, int heads);

/// Softmax attention weights [heads, Hq*Wq, Hk*Wk] used by `attention`.
Tensor attention_weights(const Tensor& q, const Tensor& k, int heads);

/// Bilinear resampling with half-pixel centres and edge clamping.
Var resize_bilinear(const Var& x, int out_h, int out_w);
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

double gelu_value(double x);

}  // namespace dmssn::ops
