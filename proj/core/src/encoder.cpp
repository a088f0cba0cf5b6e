#include "motionseg/encoder.hpp"

#include <stdexcept>
#include <string>

#include "motionseg/ops.hpp"

namespace motionseg {

namespace {

Tensor conv_bias_relu(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride) {
  Tensor y = conv_chw(x, kernel, {.stride = stride, .padding = 1});
  y = add(y, reshape(bias, {bias.dim(0), 1, 1}));
  return relu(y);
}

Tensor run_stage(const Tensor& x, const StageParams& stage, int stride) {
  if (stage.kernels.empty() || stage.kernels.size() != stage.biases.size()) {
    throw std::invalid_argument("backbone stage needs matching kernel/bias lists");
  }
  Tensor y = conv_bias_relu(x, stage.kernels[0], stage.biases[0], stride);
  for (size_t i = 1; i < stage.kernels.size(); ++i) {
    y = conv_bias_relu(y, stage.kernels[i], stage.biases[i], 1);
  }
  return y;
}

}  // namespace

void validate_backbone(const BackboneConfig& config) {
  if (config.stage_channels.size() != 4 || config.stage_strides.size() != 4) {
    throw std::invalid_argument("backbone needs exactly 4 stages, got " +
                                std::to_string(config.stage_channels.size()) + " channel and " +
                                std::to_string(config.stage_strides.size()) + " stride entries");
  }
  for (int c : config.stage_channels) {
    if (c <= 0) throw std::invalid_argument("stage channel counts must be positive");
  }
  for (int s : config.stage_strides) {
    if (s != 1 && s != 2) {
      throw std::invalid_argument("stage strides must be 1 or 2, got " + std::to_string(s));
    }
  }
  if (config.convs_per_stage < 1) throw std::invalid_argument("convs_per_stage must be >= 1");
}

int stride_product(const BackboneConfig& config) {
  int p = 1;
  for (int s : config.stage_strides) p *= s;
  return p;
}

int stage_resolution(const BackboneConfig& config, int input_extent, int stage) {
  int r = input_extent;
  for (int i = 0; i <= stage; ++i) r /= config.stage_strides[static_cast<size_t>(i)];
  return r;
}

std::pair<Tensor, Tensor> soft_attention(const Tensor& V, const Tensor& w) {
  if (V.rank() != 3) {
    throw std::invalid_argument("soft_attention expects [C,H,W] features, got " +
                                shape_str(V.shape()));
  }
  if (w.rank() != 4 || w.dim(0) != 1 || w.dim(1) != V.dim(0) || w.dim(2) != 1 || w.dim(3) != 1) {
    throw std::invalid_argument("soft_attention kernel must be [1," + std::to_string(V.dim(0)) +
                                ",1,1], got " + shape_str(w.shape()));
  }
  Tensor logits = conv_chw(V, w);                       // [1,H,W]
  Tensor A = softmax_over(logits, {1, 2});              // normalized over all positions
  A = reshape(A, {V.dim(1), V.dim(2)});
  Tensor U_tilde = mul(A, V);                           // broadcast over channels
  return {A, U_tilde};
}

TransitionResult attention_transition_full(const Tensor& U_tilde_a, const Tensor& U_tilde_m,
                                           const Tensor& P, const Tensor& Q, bool transposed) {
  if (U_tilde_a.shape() != U_tilde_m.shape() || U_tilde_a.rank() != 3) {
    throw std::invalid_argument("attention_transition expects matching [C,H,W] features, got " +
                                shape_str(U_tilde_a.shape()) + " and " +
                                shape_str(U_tilde_m.shape()));
  }
  const int C = U_tilde_a.dim(0), H = U_tilde_a.dim(1), W = U_tilde_a.dim(2);
  if (P.rank() != 2 || Q.rank() != 2 || P.dim(0) != C || Q.dim(0) != C ||
      P.dim(1) != Q.dim(1)) {
    throw std::invalid_argument("low-rank factors must both be [C,C/d] with C=" +
                                std::to_string(C) + ", got " + shape_str(P.shape()) + " and " +
                                shape_str(Q.shape()));
  }
  Tensor Ma = reshape(U_tilde_a, {C, H * W});
  Tensor Mm = reshape(U_tilde_m, {C, H * W});
  Tensor Pm = matmul(transpose2d(P), Mm);               // [C/d, HW]
  Tensor Qa = matmul(transpose2d(Q), Ma);               // [C/d, HW]
  Tensor S = matmul(transpose2d(Pm), Qa);               // [HW, HW], rows = motion positions
  Tensor S_r = softmax_over(S, {1});
  Tensor mixed = matmul(Ma, transposed ? transpose2d(S_r) : S_r);
  return {reshape(mixed, {C, H, W}), S_r};
}

Tensor attention_transition(const Tensor& U_tilde_a, const Tensor& U_tilde_m, const Tensor& P,
                            const Tensor& Q, bool transposed) {
  return attention_transition_full(U_tilde_a, U_tilde_m, P, Q, transposed).output;
}

std::pair<Tensor, Tensor> mat_layer(const Tensor& U_a_prev, const Tensor& U_m_prev,
                                    const MatParams& params, bool transposed) {
  if (U_a_prev.shape() != U_m_prev.shape()) {
    throw std::invalid_argument("mat_layer stream shapes differ: " + shape_str(U_a_prev.shape()) +
                                " vs " + shape_str(U_m_prev.shape()));
  }
  auto [A_a, U_tilde_a] = soft_attention(U_a_prev, params.w_a);
  auto [A_m, U_tilde_m] = soft_attention(U_m_prev, params.w_m);
  Tensor transitioned = attention_transition(U_tilde_a, U_tilde_m, params.P, params.Q, transposed);
  Tensor U_a = add(U_a_prev, transitioned);
  Tensor U_m = add(U_m_prev, U_tilde_m);
  return {U_a, U_m};
}

std::pair<Tensor, Tensor> deep_mat(const Tensor& V_a, const Tensor& V_m,
                                   const std::vector<MatParams>& layers, bool transposed) {
  Tensor U_a = V_a, U_m = V_m;
  for (const MatParams& layer : layers) {
    std::tie(U_a, U_m) = mat_layer(U_a, U_m, layer, transposed);
  }
  return {U_a, U_m};
}

std::vector<StageFeatures> encode(const Tensor& frame, const Tensor& flow,
                                  const EncoderParams& params, const BackboneConfig& config,
                                  bool transposed) {
  validate_backbone(config);
  if (frame.rank() != 3 || flow.rank() != 3 || frame.dim(0) != 3 || flow.dim(0) != 3) {
    throw std::invalid_argument("encode expects [3,H,W] frame and flow, got " +
                                shape_str(frame.shape()) + " and " + shape_str(flow.shape()));
  }
  if (frame.dim(1) != flow.dim(1) || frame.dim(2) != flow.dim(2)) {
    throw std::invalid_argument("frame and flow resolutions differ: " + shape_str(frame.shape()) +
                                " vs " + shape_str(flow.shape()));
  }
  const int divisor = stride_product(config);
  if (frame.dim(1) % divisor != 0 || frame.dim(2) % divisor != 0) {
    throw std::invalid_argument("input extent " + std::to_string(frame.dim(1)) + "x" +
                                std::to_string(frame.dim(2)) + " must be divisible by the stride product " +
                                std::to_string(divisor));
  }
  if (params.appearance.size() != 4 || params.motion.size() != 4 || params.mat.size() != 4) {
    throw std::invalid_argument("encoder parameters must cover exactly 4 stages");
  }
  std::vector<StageFeatures> stages;
  stages.reserve(4);
  Tensor a = frame, m = flow;
  for (int i = 0; i < 4; ++i) {
    StageFeatures sf;
    const int stride = config.stage_strides[static_cast<size_t>(i)];
    sf.V_a = run_stage(a, params.appearance[static_cast<size_t>(i)], stride);
    sf.V_m = run_stage(m, params.motion[static_cast<size_t>(i)], stride);
    std::tie(sf.U_a, sf.U_m) = deep_mat(sf.V_a, sf.V_m, params.mat[static_cast<size_t>(i)], transposed);
    sf.U = concat({sf.U_a, sf.U_m}, 0);
    a = sf.U_a;
    m = sf.U_m;
    stages.push_back(std::move(sf));
  }
  return stages;
}

}  // namespace motionseg
