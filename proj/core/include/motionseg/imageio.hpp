#pragma once

#include <string>

#include "motionseg/tensor.hpp"

namespace motionseg {

// Binary netpbm with maxval 255. Gray planes are [H,W] tensors, color images
// [3,H,W], all values in [0,1] (quantized to bytes on write).

void write_pgm(const std::string& path, const Tensor& plane);
Tensor read_pgm(const std::string& path);

void write_ppm(const std::string& path, const Tensor& rgb);
Tensor read_ppm(const std::string& path);

}  // namespace motionseg
