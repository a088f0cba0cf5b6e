#pragma once

#include <utility>
#include <vector>

#include "motionseg/tensor.hpp"

namespace motionseg {

struct BackboneConfig {
  std::vector<int> stage_channels{8, 16, 32, 32};
  std::vector<int> stage_strides{2, 2, 2, 1};
  int convs_per_stage = 2;
};

void validate_backbone(const BackboneConfig& config);
int stride_product(const BackboneConfig& config);      // cumulative over all stages
int stage_resolution(const BackboneConfig& config, int input_extent, int stage);

// One MAT layer: spatial-attention kernels for both streams plus the
// low-rank bilinear factors of the transition. Kernels are [1,C,1,1],
// factors [C, C/d]; none carry biases.
struct MatParams {
  Tensor w_a, w_m;
  Tensor P, Q;
};

// Per-stream convolution stack of one backbone stage. The first conv applies
// the stage stride; every conv is 3x3 with padding 1, followed by ReLU.
struct StageParams {
  std::vector<Tensor> kernels;  // [C_out, C_in, 3, 3]
  std::vector<Tensor> biases;   // [C_out]
};

struct EncoderParams {
  std::vector<StageParams> appearance;        // 4 stages
  std::vector<StageParams> motion;            // 4 stages
  std::vector<std::vector<MatParams>> mat;    // per stage, L layers
};

struct StageFeatures {
  Tensor V_a, V_m;  // backbone outputs, [C,H,W]
  Tensor U_a, U_m;  // after the deep MAT block
  Tensor U;         // channel concat [2C,H,W] of U_a then U_m
};

// A = spatial softmax (over all H*W positions) of the 1x1 projection of V;
// U_tilde = A broadcast-multiplied into every channel of V.
std::pair<Tensor, Tensor> soft_attention(const Tensor& V, const Tensor& w);

struct TransitionResult {
  Tensor output;        // [C,H,W]
  Tensor row_softmax;   // S^r, [HW,HW], rows indexed by motion positions
};

// S = (P^T Um)^T (Q^T Ua) over the C x HW flattenings, row-softmaxed, then
// applied to Ua. With `transposed` the alternative Ua (S^r)^T mixing is used.
TransitionResult attention_transition_full(const Tensor& U_tilde_a, const Tensor& U_tilde_m,
                                           const Tensor& P, const Tensor& Q,
                                           bool transposed = false);
Tensor attention_transition(const Tensor& U_tilde_a, const Tensor& U_tilde_m, const Tensor& P,
                            const Tensor& Q, bool transposed = false);

// Residual MAT layer: appearance gains the transitioned term, motion gains
// its own attended features; both keep their inputs.
std::pair<Tensor, Tensor> mat_layer(const Tensor& U_a_prev, const Tensor& U_m_prev,
                                    const MatParams& params, bool transposed = false);

// L stacked residual layers; L = 0 passes both streams through untouched.
std::pair<Tensor, Tensor> deep_mat(const Tensor& V_a, const Tensor& V_m,
                                   const std::vector<MatParams>& layers, bool transposed = false);

// Full two-stream encoder: each stage runs both conv stacks, then the deep
// MAT block; the MAT outputs (not the raw stage features) feed the next
// stage of each stream.
std::vector<StageFeatures> encode(const Tensor& frame, const Tensor& flow,
                                  const EncoderParams& params, const BackboneConfig& config,
                                  bool transposed = false);

}  // namespace motionseg
