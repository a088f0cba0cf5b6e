#include "motionseg/loss.hpp"

#include <stdexcept>
#include <string>

#include "motionseg/mask.hpp"
#include "motionseg/ops.hpp"

namespace motionseg {

namespace {

constexpr double kClipEps = 1e-7;
constexpr double kEdgeThreshold = 0.2;

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + " shape mismatch: " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

// -mean(w * (g*log(p) + (1-g)*log(1-p))) with p clamped away from {0,1}.
Tensor weighted_bce(const Tensor& pred, const Tensor& gt, const Tensor& weights) {
  Tensor p = clamp(pred, kClipEps, 1.0 - kClipEps);
  Tensor pos = mul(gt, log(p));
  Tensor neg = mul(affine(gt, -1.0, 1.0), log(affine(p, -1.0, 1.0)));
  Tensor per_pixel = mul(weights, add(pos, neg));
  return affine(mean_all(per_pixel), -1.0);
}

}  // namespace

Tensor hem_weights(const Tensor& edge, const Tensor& mask, int dilation_radius) {
  require_binary(mask, "hem_weights mask");
  require_same_shape(edge, mask, "hem_weights");
  const double* e = edge.data();
  for (long long i = 0; i < edge.size(); ++i) {
    if (e[i] < 0.0 || e[i] > 1.0) {
      throw std::invalid_argument("hem_weights edge map must lie in [0,1], found " +
                                  std::to_string(e[i]));
    }
  }
  Tensor dilated = dilate_disc(mask, dilation_radius);
  Tensor w(mask.shape());
  const double* d = dilated.data();
  double* out = w.data();
  for (long long i = 0; i < w.size(); ++i) {
    out[i] = (e[i] > kEdgeThreshold && d[i] == 0.0) ? 1.0 + e[i] : 1.0;
  }
  return w;
}

Tensor boundary_loss(const Tensor& pred, const Tensor& gt_boundary, const Tensor& weights) {
  require_same_shape(pred, gt_boundary, "boundary_loss");
  require_same_shape(pred, weights, "boundary_loss weights");
  return weighted_bce(pred, gt_boundary, weights);
}

Tensor bce_mean(const Tensor& pred, const Tensor& gt) {
  require_same_shape(pred, gt, "bce_mean");
  return weighted_bce(pred, gt, Tensor::full(pred.shape(), 1.0));
}

Tensor max_pool_plane(const Tensor& plane, int factor) {
  if (plane.rank() != 2) {
    throw std::invalid_argument("max_pool_plane expects [H,W], got " + shape_str(plane.shape()));
  }
  if (factor < 1) throw std::invalid_argument("max_pool_plane needs factor >= 1");
  const int H = plane.dim(0), W = plane.dim(1);
  if (H % factor != 0 || W % factor != 0) {
    throw std::invalid_argument("max_pool_plane factor " + std::to_string(factor) +
                                " does not divide " + shape_str(plane.shape()));
  }
  if (factor == 1) return plane.clone();
  const int OH = H / factor, OW = W / factor;
  Tensor out({OH, OW});
  const double* p = plane.data();
  double* o = out.data();
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      double best = p[static_cast<long long>(oy) * factor * W + ox * factor];
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) {
          const double v = p[(static_cast<long long>(oy) * factor + dy) * W + ox * factor + dx];
          if (v > best) best = v;
        }
      o[static_cast<long long>(oy) * OW + ox] = best;
    }
  }
  return out;
}

LossParts total_loss(const Tensor& mask_pred, const Tensor& mask_gt,
                     const std::vector<Tensor>& boundary_preds, const Tensor& gt_boundary,
                     const Tensor& weights, bool supervise_full_res) {
  if (boundary_preds.size() != 4) {
    throw std::invalid_argument("total_loss expects 4 boundary predictions, got " +
                                std::to_string(boundary_preds.size()));
  }
  LossParts parts;
  parts.ce = bce_mean(mask_pred, mask_gt);
  Tensor acc;
  for (const Tensor& pred : boundary_preds) {
    if (pred.rank() != 2) {
      throw std::invalid_argument("boundary prediction must be [H,W], got " + shape_str(pred.shape()));
    }
    const int factor = gt_boundary.dim(0) / pred.dim(0);
    if (factor < 1 || factor * pred.dim(0) != gt_boundary.dim(0) ||
        factor * pred.dim(1) != gt_boundary.dim(1)) {
      throw std::invalid_argument("boundary prediction " + shape_str(pred.shape()) +
                                  " is not an integer downscale of target " +
                                  shape_str(gt_boundary.shape()));
    }
    Tensor term;
    if (supervise_full_res) {
      Tensor up = reshape(upsample_chw(reshape(pred, {1, pred.dim(0), pred.dim(1)}), factor),
                          gt_boundary.shape());
      term = boundary_loss(up, gt_boundary, weights);
    } else {
      term = boundary_loss(pred, max_pool_plane(gt_boundary, factor),
                           max_pool_plane(weights, factor));
    }
    acc = acc.defined() ? add(acc, term) : term;
  }
  parts.boundary = affine(acc, 0.25);
  parts.total = add(parts.ce, parts.boundary);
  return parts;
}

}  // namespace motionseg
