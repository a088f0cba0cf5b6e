#include "motionseg/bridge.hpp"

#include <algorithm>
#include <stdexcept>

#include "motionseg/ops.hpp"

namespace motionseg {

namespace {

void require_features(const Tensor& U, const char* what) {
  if (!U.defined() || U.rank() != 3) {
    throw std::invalid_argument(std::string(what) + " expects [2C,H,W] features, got " +
                                (U.defined() ? shape_str(U.shape()) : "undefined"));
  }
}

// Squeeze + two fc layers; the excitation in [1, out_width].
Tensor excite(const Tensor& U, const Tensor& w1, const Tensor& b1, const Tensor& w2,
              const Tensor& b2, bool relu_between) {
  const int C = U.dim(0);
  Tensor pooled = global_avg_pool(reshape(U, {1, C, U.dim(1), U.dim(2)}));  // [1,C]
  Tensor hidden = linear(pooled, w1, b1);
  if (relu_between) hidden = relu(hidden);
  return sigmoid(linear(hidden, w2, b2));
}

}  // namespace

int ssa_hidden_width(int channels) {
  if (channels < 1) throw std::invalid_argument("ssa_hidden_width needs positive channels");
  return std::max(1, channels / std::min(16, channels));
}

Tensor channel_attention(const Tensor& U, const SsaParams& params) {
  require_features(U, "channel_attention");
  const int C = U.dim(0);
  Tensor e = excite(U, params.ch_w1, params.ch_b1, params.ch_w2, params.ch_b2, true);  // [1,C]
  return mul(reshape(e, {C, 1, 1}), U);
}

Tensor spatial_attention(const Tensor& Z_c, const Tensor& kernel7) {
  require_features(Z_c, "spatial_attention");
  if (kernel7.rank() != 4 || kernel7.dim(0) != 1 || kernel7.dim(1) != 2 || kernel7.dim(2) != 7 ||
      kernel7.dim(3) != 7) {
    throw std::invalid_argument("spatial_attention kernel must be [1,2,7,7], got " +
                                shape_str(kernel7.shape()));
  }
  Tensor mean_plane = reduce_mean(Z_c, 0);                 // [1,H,W]
  Tensor max_plane = reduce_max(Z_c, 0);                   // [1,H,W]
  Tensor descriptor = concat({mean_plane, max_plane}, 0);  // [2,H,W]
  Tensor p = sigmoid(conv_chw(descriptor, kernel7, {.padding = 3}));  // [1,H,W]
  return mul(p, Z_c);
}

SsaResult ssa_forward(const Tensor& U, const SsaParams& params) {
  require_features(U, "ssa_forward");
  SsaResult r;
  const int C = U.dim(0);
  Tensor e = excite(U, params.ch_w1, params.ch_b1, params.ch_w2, params.ch_b2, true);
  r.e = reshape(e, {C});
  r.Z_c = mul(reshape(e, {C, 1, 1}), U);

  Tensor mean_plane = reduce_mean(r.Z_c, 0);
  Tensor max_plane = reduce_max(r.Z_c, 0);
  Tensor p = sigmoid(conv_chw(concat({mean_plane, max_plane}, 0), params.spatial_kernel,
                              {.padding = 3}));
  r.p = reshape(p, {U.dim(1), U.dim(2)});
  r.Z_cbam = mul(p, r.Z_c);

  Tensor g = excite(r.Z_cbam, params.g_w1, params.g_b1, params.g_w2, params.g_b2, false);  // [1,1]
  r.g = reshape(g, {1});
  r.Z = add(mul(reshape(g, std::vector<int>{1}), r.Z_cbam), U);
  return r;
}

}  // namespace motionseg
