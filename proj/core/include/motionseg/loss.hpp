#pragma once

#include <vector>

#include "motionseg/tensor.hpp"

namespace motionseg {

// Per-pixel weights for the boundary loss: w = 1 + E where the edge response
// exceeds 0.2 AND the pixel lies outside the ground-truth region dilated by a
// Euclidean disc; w = 1 everywhere else. Values land in {1} U (1.2, 2].
Tensor hem_weights(const Tensor& edge, const Tensor& mask, int dilation_radius);

// Weighted binary cross-entropy over a [H,W] prediction in (0,1), averaged
// over pixels. Predictions are clamped to [1e-7, 1 - 1e-7] before the logs.
Tensor boundary_loss(const Tensor& pred, const Tensor& gt_boundary, const Tensor& weights);

// Unweighted pixel-mean BCE (the mask term).
Tensor bce_mean(const Tensor& pred, const Tensor& gt);

struct LossParts {
  Tensor total;     // ce + mean of the four boundary losses
  Tensor ce;
  Tensor boundary;  // mean of the four boundary losses
};

// Boundary predictions arrive at their native stage resolutions. By default
// the full-resolution targets (gt_boundary and weights) are max-pooled down
// to each prediction's extent; with supervise_full_res the predictions are
// bilinearly upsampled to the target extent instead.
LossParts total_loss(const Tensor& mask_pred, const Tensor& mask_gt,
                     const std::vector<Tensor>& boundary_preds, const Tensor& gt_boundary,
                     const Tensor& weights, bool supervise_full_res = false);

// Plain max pooling with a square cell; used to downsample binary targets
// without thinning them away.
Tensor max_pool_plane(const Tensor& plane, int factor);

}  // namespace motionseg
