#pragma once

#include <cstdint>
#include <optional>

#include "crformer/tensor.hpp"

namespace crformer {

// Region-wise mean absolute error in LAB units. An empty region keeps its
// count at zero and leaves the corresponding MAE unset; nothing here ever
// produces NaN. all_mae is always the pixel-count-weighted combination of
// the two regions (equivalently, the mean over every pixel of the image).
struct RegionMetrics {
    std::optional<double> shadow_mae;
    std::optional<double> nonshadow_mae;
    double all_mae = 0.0;
    std::int64_t shadow_pixels = 0;
    std::int64_t nonshadow_pixels = 0;
};

// Converts pred and gt to LAB and averages |pred - gt| over pixels x 3
// channels jointly, per region of the binary mask (1 = shadow).
RegionMetrics region_mae(const Tensor& pred, const Tensor& gt, const Tensor& mask);

// Peak 1.0 over the RGB mean squared error; identical inputs return +inf.
double psnr(const Tensor& pred, const Tensor& gt);

// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, C1=0.01^2,
// C2=0.03^2), averaged over channels. Needs H,W >= 11.
double ssim(const Tensor& pred, const Tensor& gt);

// Otsu's method on a 256-bin histogram of values in [0,1]. Picks the bin
// index t maximizing between-class variance (classes bin <= t vs bin > t,
// ties to the lowest t) and returns the class boundary (t+1)/256, i.e. the
// value a strict-> binarizer needs to reproduce the split. A constant
// image is degenerate: warns on stderr and returns the constant itself.
double otsu_threshold(const Tensor& gray);

// Shadow mask from a video frame pair: a pixel is shadow iff the reference
// is more than 40 intensity levels brighter, with intensity the unweighted
// channel mean on the 8-bit scale. Channels are snapped to the nearest
// 8-bit level first so the strict > 40 tie rule is exact.
Tensor video_region_split(const Tensor& frame, const Tensor& reference);

}  // namespace crformer
