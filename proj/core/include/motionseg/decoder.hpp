#pragma once

#include <vector>

#include "motionseg/tensor.hpp"

namespace motionseg {

// One refinement block. All feature widths inside the decoder equal the
// configured decoder channel count D; only the ASPP branch inputs vary with
// the encoder stage's channel width.
struct BarParams {
  std::vector<Tensor> aspp_kernels;  // 3x3 at dilation 1, 2, 4 and a 1x1, each [D,2C,k,k]
  std::vector<Tensor> aspp_biases;   // [D] each
  Tensor aspp_fuse_kernel;           // [D, 4D, 1, 1]
  Tensor aspp_fuse_bias;             // [D]
  Tensor bdry_k1, bdry_b1;           // [D, D, 3, 3], [D]
  Tensor bdry_k2, bdry_b2;           // [D, D, 3, 3], [D]
  Tensor bdry_k3, bdry_b3;           // [1, D, 1, 1], [1]
  Tensor fuse_kernel;                // [D, 2D+1, 3, 3]
  Tensor fuse_bias;                  // [D]
};

struct DecoderParams {
  Tensor f5_kernel, f5_bias;    // bootstrap projection of Z_5, [D, 2C5, 3, 3]
  std::vector<BarParams> bars;  // ordered BAR_5, BAR_4, BAR_3, BAR_2
  Tensor mask_kernel, mask_bias;  // [1, D, 3, 3], [1]
};

struct DecoderOutput {
  Tensor mask;                     // [H,W] at input resolution, sigmoid output
  std::vector<Tensor> boundaries;  // four [h,w] maps at stage resolutions, BAR_5 first
};

// Two 3x3 convs with a ReLU between, then 1x1, then sigmoid; one plane out.
Tensor boundary_head(const Tensor& F, const BarParams& params);

// Parallel dilated branches (ReLU each), channel-concat, 1x1 fuse + ReLU.
Tensor aspp(const Tensor& Z, const BarParams& params);

struct BarResult {
  Tensor F_next;
  Tensor M_b;
};

// F_next = upsample(fuse3x3(concat[aspp(Z), F, M_b]) + F) by the given
// factor (1 = stay at this resolution).
BarResult bar_forward(const Tensor& Z, const Tensor& F, const BarParams& params,
                      int upsample_factor);

// stage_Z ordered from stage 2 to stage 5. The mask head runs at BAR_2's
// native resolution and bilinearly upsamples to input_h x input_w before the
// sigmoid.
DecoderOutput decode(const std::vector<Tensor>& stage_Z, const DecoderParams& params,
                     int input_h, int input_w);

}  // namespace motionseg
