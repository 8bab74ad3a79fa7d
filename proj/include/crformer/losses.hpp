#pragma once

#include "crformer/tensor.hpp"

namespace crformer {

struct LossWeights {
    double w1 = 1.0;   // reconstruction
    double w2 = 10.0;  // spatial consistency
};

struct SpatialLossConfig {
    int pool_size = 4;
};

// Mean L1 of the inner prediction plus mean L1 of the refined prediction,
// both against ground truth.
Tensor reconstruction_loss(const Tensor& inner, const Tensor& refined, const Tensor& gt);

// Penalizes mismatched neighbor contrast on pooled luminance grids, for both
// predictions against ground truth.
Tensor spatial_consistency_loss(const Tensor& inner, const Tensor& refined, const Tensor& gt,
                                const SpatialLossConfig& cfg);

Tensor total_loss(const Tensor& inner, const Tensor& refined, const Tensor& gt,
                  const LossWeights& weights, const SpatialLossConfig& cfg);

}  // namespace crformer
