#pragma once

#include "motionseg/tensor.hpp"

namespace motionseg {

// Channel gate: avgpool -> fc(2C/r) -> ReLU -> fc(2C) -> sigmoid, r =
// min(16, 2C). Spatial gate: per-position channel mean+max (2 planes) ->
// 7x7 conv -> sigmoid. Global gate: avgpool -> fc(2C/r) -> fc(1) -> sigmoid
// with no ReLU between. The fc layers carry biases; the 7x7 conv does not.
struct SsaParams {
  Tensor ch_w1, ch_b1;  // [2C, hidden], [hidden]
  Tensor ch_w2, ch_b2;  // [hidden, 2C], [2C]
  Tensor spatial_kernel;  // [1, 2, 7, 7]
  Tensor g_w1, g_b1;    // [2C, hidden], [hidden]
  Tensor g_w2, g_b2;    // [hidden, 1], [1]
};

int ssa_hidden_width(int channels);  // max(1, channels / min(16, channels))

Tensor channel_attention(const Tensor& U, const SsaParams& params);
Tensor spatial_attention(const Tensor& Z_c, const Tensor& kernel7);

struct SsaResult {
  Tensor Z;       // g * Z_cbam + U
  Tensor Z_c;     // after the channel gate
  Tensor Z_cbam;  // after the spatial gate
  Tensor e;       // [2C] channel excitation
  Tensor p;       // [H,W] spatial gate
  Tensor g;       // [1] global gate
};

SsaResult ssa_forward(const Tensor& U, const SsaParams& params);

}  // namespace motionseg
