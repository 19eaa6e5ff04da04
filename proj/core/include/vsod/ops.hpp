#pragma once

#include <span>

#include "vsod/autograd.hpp"

// Differentiable tensor primitives. Every op validates shapes, computes the
// forward value eagerly and records its adjoint when any input requires grad.
namespace vsod::ops {

struct ConvSpec {
    int stride = 1;
    int pad = 0;
    int dilation = 1;
};

/// Cross-correlation. weight is (Cout, Cin, k, k); bias, when defined, is (1, Cout, 1, 1).
Var conv2d(const Var& x, const Var& weight, const Var& bias, ConvSpec spec);

/// Output spatial extent of a convolution along one axis.
int conv_out_extent(int in, int kernel, ConvSpec spec);

Var relu(const Var& x);
Var sigmoid(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);

/// out[b,c,y,x] = x[b,c,y,x] * s[b]; s is (N,1,1,1).
Var scale_per_sample(const Var& x, const Var& s);

Var concat_channels(std::span<const Var> parts);

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps = 1e-5);

/// (N,C,H,W) -> (N,C,1,1).
Var global_avg_pool(const Var& x);

/// (N,C,1,1) -> (N,C,h,w) by replication.
Var broadcast_spatial(const Var& x, int h, int w);

/// Bilinear resize with half-pixel centres (align_corners disabled).
Var upsample_bilinear(const Var& x, int out_h, int out_w);

/// Mean of all elements as a (1,1,1,1) scalar.
Var mean_all(const Var& x);

/// Sum of (1,1,1,1) scalars.
Var add_scalars(std::span<const Var> terms);

}  // namespace vsod::ops

namespace vsod {

/// Non-differentiable bilinear resize, same sampling convention as ops::upsample_bilinear.
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

/// Area-average pooling by an integer factor; used to bring masks to pyramid resolution.
Tensor area_downsample(const Tensor& x, int factor);

}  // namespace vsod
