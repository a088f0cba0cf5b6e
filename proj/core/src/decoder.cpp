#include "motionseg/decoder.hpp"

#include <stdexcept>
#include <string>

#include "motionseg/ops.hpp"

namespace motionseg {

namespace {

constexpr int kAsppDilations[3] = {1, 2, 4};

Tensor conv_bias(const Tensor& x, const Tensor& kernel, const Tensor& bias, const Conv2dSpec& spec) {
  return add(conv_chw(x, kernel, spec), reshape(bias, {bias.dim(0), 1, 1}));
}

}  // namespace

Tensor boundary_head(const Tensor& F, const BarParams& params) {
  if (F.rank() != 3) {
    throw std::invalid_argument("boundary_head expects [D,H,W], got " + shape_str(F.shape()));
  }
  Tensor h = relu(conv_bias(F, params.bdry_k1, params.bdry_b1, {.padding = 1}));
  h = conv_bias(h, params.bdry_k2, params.bdry_b2, {.padding = 1});
  h = conv_bias(h, params.bdry_k3, params.bdry_b3, {});
  return reshape(sigmoid(h), {F.dim(1), F.dim(2)});
}

Tensor aspp(const Tensor& Z, const BarParams& params) {
  if (Z.rank() != 3) {
    throw std::invalid_argument("aspp expects [2C,H,W], got " + shape_str(Z.shape()));
  }
  if (params.aspp_kernels.size() != 4 || params.aspp_biases.size() != 4) {
    throw std::invalid_argument("aspp needs 3 dilated branches plus a 1x1 branch");
  }
  std::vector<Tensor> branches;
  branches.reserve(4);
  for (int i = 0; i < 3; ++i) {
    const int d = kAsppDilations[i];
    branches.push_back(relu(conv_bias(Z, params.aspp_kernels[static_cast<size_t>(i)],
                                      params.aspp_biases[static_cast<size_t>(i)],
                                      {.padding = d, .dilation = d})));
  }
  branches.push_back(relu(conv_bias(Z, params.aspp_kernels[3], params.aspp_biases[3], {})));
  Tensor cat = concat(branches, 0);
  return relu(conv_bias(cat, params.aspp_fuse_kernel, params.aspp_fuse_bias, {}));
}

BarResult bar_forward(const Tensor& Z, const Tensor& F, const BarParams& params,
                      int upsample_factor) {
  if (Z.rank() != 3 || F.rank() != 3 || Z.dim(1) != F.dim(1) || Z.dim(2) != F.dim(2)) {
    throw std::invalid_argument("bar_forward inputs must share spatial extent, got " +
                                shape_str(Z.shape()) + " and " + shape_str(F.shape()));
  }
  if (upsample_factor < 1) throw std::invalid_argument("bar upsample factor must be >= 1");
  BarResult r;
  r.M_b = boundary_head(F, params);
  Tensor context = aspp(Z, params);
  Tensor cat = concat({context, F, reshape(r.M_b, {1, F.dim(1), F.dim(2)})}, 0);
  Tensor fused = conv_bias(cat, params.fuse_kernel, params.fuse_bias, {.padding = 1});
  Tensor refined = add(fused, F);
  r.F_next = upsample_factor == 1 ? refined : upsample_chw(refined, upsample_factor);
  return r;
}

DecoderOutput decode(const std::vector<Tensor>& stage_Z, const DecoderParams& params,
                     int input_h, int input_w) {
  if (stage_Z.size() != 4) {
    throw std::invalid_argument("decode expects 4 stage features, got " +
                                std::to_string(stage_Z.size()));
  }
  if (params.bars.size() != 4) {
    throw std::invalid_argument("decoder needs 4 BAR parameter sets, got " +
                                std::to_string(params.bars.size()));
  }
  DecoderOutput out;
  Tensor F = conv_bias(stage_Z[3], params.f5_kernel, params.f5_bias, {.padding = 1});
  // BAR_i consumes Z_i and hands its feature to BAR_{i-1}, upsampling when
  // the next stage sits at a finer resolution.
  for (int i = 3; i >= 0; --i) {
    const Tensor& Z = stage_Z[static_cast<size_t>(i)];
    const int factor = i > 0 ? stage_Z[static_cast<size_t>(i - 1)].dim(1) / Z.dim(1) : 1;
    BarResult r = bar_forward(Z, F, params.bars[static_cast<size_t>(3 - i)], factor);
    out.boundaries.push_back(r.M_b);
    F = r.F_next;
  }
  const int mask_factor = input_h / F.dim(1);
  if (mask_factor < 1 || mask_factor * F.dim(1) != input_h || mask_factor * F.dim(2) != input_w) {
    throw std::invalid_argument("decoder feature " + shape_str(F.shape()) +
                                " does not upscale to " + std::to_string(input_h) + "x" +
                                std::to_string(input_w));
  }
  Tensor logits = conv_bias(F, params.mask_kernel, params.mask_bias, {.padding = 1});  // [1,h,w]
  if (mask_factor > 1) logits = upsample_chw(logits, mask_factor);
  out.mask = reshape(sigmoid(logits), {input_h, input_w});
  return out;
}

}  // namespace motionseg
