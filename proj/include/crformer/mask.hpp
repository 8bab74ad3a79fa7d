#pragma once

#include <cstdint>
#include <vector>

#include "crformer/tensor.hpp"

namespace crformer {

// Masks are [1,H,W] tensors holding exactly 0 (non-shadow) or 1 (shadow).
void validate_binary_mask(const Tensor& mask);

// Strictly-greater threshold; ties land in the non-shadow class.
Tensor binarize_mask(const Tensor& gray, double threshold);

// Any-shadow rule: a cell is shadow if any covered source pixel is shadow.
Tensor downsample_mask(const Tensor& mask, int factor);

// Row-major token view of a binary mask.
std::vector<std::uint8_t> flatten_mask(const Tensor& mask);

double shadow_fraction(const Tensor& mask);

}  // namespace crformer
