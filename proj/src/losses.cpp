#include "crformer/losses.hpp"

#include "crformer/errors.hpp"

namespace crformer {

namespace {

void check_triplet(const Tensor& inner, const Tensor& refined, const Tensor& gt) {
    if (gt.shape().size() != 3) {
        throw DimensionError("loss: images must be [C,H,W], got " + shape_str(gt.shape()));
    }
    if (inner.shape() != gt.shape() || refined.shape() != gt.shape()) {
        throw DimensionError("loss: prediction shapes " + shape_str(inner.shape()) + "/" +
                             shape_str(refined.shape()) + " do not match ground truth " +
                             shape_str(gt.shape()));
    }
}

Tensor contrast_mismatch(const Tensor& pred, const Tensor& gt, int k) {
    return neighbor_diff_penalty(local_area_means(pred, k), local_area_means(gt, k));
}

}  // namespace

Tensor reconstruction_loss(const Tensor& inner, const Tensor& refined, const Tensor& gt) {
    check_triplet(inner, refined, gt);
    return add(mean_abs_diff(inner, gt), mean_abs_diff(refined, gt));
}

Tensor spatial_consistency_loss(const Tensor& inner, const Tensor& refined, const Tensor& gt,
                                const SpatialLossConfig& cfg) {
    check_triplet(inner, refined, gt);
    if (cfg.pool_size < 1) throw ConfigError("spatial loss: pool_size must be >= 1");
    return add(contrast_mismatch(inner, gt, cfg.pool_size),
               contrast_mismatch(refined, gt, cfg.pool_size));
}

Tensor total_loss(const Tensor& inner, const Tensor& refined, const Tensor& gt,
                  const LossWeights& weights, const SpatialLossConfig& cfg) {
    if (weights.w1 < 0.0 || weights.w2 < 0.0) {
        throw ConfigError("loss weights must be nonnegative");
    }
    return add(scale(reconstruction_loss(inner, refined, gt), weights.w1),
               scale(spatial_consistency_loss(inner, refined, gt, cfg), weights.w2));
}

}  // namespace crformer
