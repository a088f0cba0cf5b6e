#pragma once

#include "motionseg/tensor.hpp"

namespace motionseg {

// Binary masks are [H,W] tensors holding exactly 0 or 1. Pixels outside the
// image count as background for both dilation and erosion, so erosion eats
// the border ring of a full-frame mask.

Tensor dilate3x3(const Tensor& mask);
Tensor erode3x3(const Tensor& mask);

// k iterated 3x3 dilations: covers Chebyshev distance <= k.
Tensor dilate_chebyshev(const Tensor& mask, int k);

// Euclidean disc of the given radius.
Tensor dilate_disc(const Tensor& mask, int radius);

// Inner rim: mask minus its 3x3 erosion. Empty mask gives empty boundary; a
// full-frame mask gives the image border ring.
Tensor boundary_of(const Tensor& mask);

Tensor binarize(const Tensor& soft, double threshold);

long long count_nonzero(const Tensor& mask);
void require_binary(const Tensor& mask, const char* what);

}  // namespace motionseg
