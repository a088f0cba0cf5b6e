#pragma once

#include <vector>

#include "motionseg/tensor.hpp"

namespace motionseg {

// All ops are pure: they read their operands, produce a fresh tensor, and
// (when any operand is tracked) record an exact backward rule on the tape.
// Binary ops broadcast numpy-style: shapes are right-aligned, missing leading
// axes count as 1, and a singleton axis broadcasts against any extent.
// Gradients are summed over broadcast axes.

struct Conv2dSpec {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

// input [N,C,H,W], kernel [K,C,kh,kw] (kh, kw odd) -> [N,K,H',W'].
// Cross-correlation, no kernel flip.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Conv2dSpec& spec = {});

Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K] x [K,N] -> [M,N]
Tensor transpose2d(const Tensor& a);              // [M,N] -> [N,M]

Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// Exponentials normalized over the flattened set of axes; max-subtracted for
// stability. Each normalization group sums to 1.
Tensor softmax_over(const Tensor& x, const std::vector<int>& axes);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);  // gradient at exactly 0 is 0
Tensor affine(const Tensor& x, double scale, double shift = 0.0);
Tensor log(const Tensor& x);
// Clamps to [lo, hi]; gradient passes only strictly inside the interval.
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]
Tensor reduce_mean(const Tensor& x, int axis);  // keeps the axis as extent 1
Tensor reduce_max(const Tensor& x, int axis);   // ties resolve to the first index

Tensor global_avg_pool(const Tensor& x);  // [N,C,H,W] -> [N,C]

// Bilinear interpolation, align-corners-false convention. factor >= 1.
Tensor upsample_bilinear(const Tensor& x, int factor);  // [N,C,H,W] -> [N,C,fH,fW]

// x [N,I] * w [I,O] + b [O]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Single-sample wrappers used by the network code ([C,H,W] activations).
Tensor conv_chw(const Tensor& x, const Tensor& kernel, const Conv2dSpec& spec = {});
Tensor upsample_chw(const Tensor& x, int factor);

}  // namespace motionseg
