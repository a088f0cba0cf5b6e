#include "motionseg/mask.hpp"

#include <stdexcept>
#include <string>

namespace motionseg {

namespace {

void require_plane(const Tensor& mask, const char* what) {
  if (!mask.defined() || mask.rank() != 2) {
    throw std::invalid_argument(std::string(what) + " expects a [H,W] mask, got " +
                                (mask.defined() ? shape_str(mask.shape()) : "undefined"));
  }
}

// fn(value_at) where value_at(dy, dx) reads the neighborhood with 0 outside.
template <typename F>
Tensor neighborhood_op(const Tensor& mask, F&& combine) {
  const int H = mask.dim(0), W = mask.dim(1);
  Tensor out({H, W});
  const double* m = mask.data();
  double* o = out.data();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const auto at = [&](int dy, int dx) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= H || xx < 0 || xx >= W) return 0.0;
        return m[static_cast<long long>(yy) * W + xx];
      };
      o[static_cast<long long>(y) * W + x] = combine(at);
    }
  }
  return out;
}

}  // namespace

void require_binary(const Tensor& mask, const char* what) {
  require_plane(mask, what);
  const double* m = mask.data();
  for (long long i = 0; i < mask.size(); ++i) {
    if (m[i] != 0.0 && m[i] != 1.0) {
      throw std::invalid_argument(std::string(what) + " expects a binary mask, found value " +
                                  std::to_string(m[i]));
    }
  }
}

Tensor dilate3x3(const Tensor& mask) {
  require_plane(mask, "dilate3x3");
  return neighborhood_op(mask, [](auto at) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (at(dy, dx) != 0.0) return 1.0;
    return 0.0;
  });
}

Tensor erode3x3(const Tensor& mask) {
  require_plane(mask, "erode3x3");
  return neighborhood_op(mask, [](auto at) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (at(dy, dx) == 0.0) return 0.0;
    return 1.0;
  });
}

Tensor dilate_chebyshev(const Tensor& mask, int k) {
  require_plane(mask, "dilate_chebyshev");
  if (k < 0) throw std::invalid_argument("dilate_chebyshev needs k >= 0");
  Tensor out = mask.clone();
  for (int i = 0; i < k; ++i) out = dilate3x3(out);
  return out;
}

Tensor dilate_disc(const Tensor& mask, int radius) {
  require_plane(mask, "dilate_disc");
  if (radius < 0) throw std::invalid_argument("dilate_disc needs radius >= 0");
  const int r2 = radius * radius;
  return neighborhood_op(mask, [&](auto at) {
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dy * dy + dx * dx <= r2 && at(dy, dx) != 0.0) return 1.0;
    return 0.0;
  });
}

Tensor boundary_of(const Tensor& mask) {
  require_plane(mask, "boundary_of");
  Tensor eroded = erode3x3(mask);
  const int H = mask.dim(0), W = mask.dim(1);
  Tensor out({H, W});
  const double* m = mask.data();
  const double* e = eroded.data();
  double* o = out.data();
  for (long long i = 0; i < mask.size(); ++i) o[i] = (m[i] != 0.0 && e[i] == 0.0) ? 1.0 : 0.0;
  return out;
}

Tensor binarize(const Tensor& soft, double threshold) {
  require_plane(soft, "binarize");
  Tensor out(soft.shape());
  const double* s = soft.data();
  double* o = out.data();
  for (long long i = 0; i < soft.size(); ++i) o[i] = s[i] >= threshold ? 1.0 : 0.0;
  return out;
}

long long count_nonzero(const Tensor& mask) {
  long long n = 0;
  const double* m = mask.data();
  for (long long i = 0; i < mask.size(); ++i)
    if (m[i] != 0.0) ++n;
  return n;
}

}  // namespace motionseg
