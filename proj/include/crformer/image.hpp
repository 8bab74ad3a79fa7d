#pragma once

#include <string>

#include "crformer/tensor.hpp"

namespace crformer {

// 8-bit PNG decode to [3,H,W] in [0,1] (values k/255). Grayscale and
// paletted files are expanded to RGB; alpha is composited away against
// black by dropping the channel.
Tensor load_image(const std::string& path);

// As load_image but averages channels down to a [1,H,W] tensor.
Tensor load_image_gray(const std::string& path);

// Writes [3,H,W] or [1,H,W] as an 8-bit PNG. Values are clamped to [0,1]
// and rounded to the nearest level, so save followed by load moves a pixel
// by at most 0.5/255. Identical tensors produce byte-identical files.
void save_image(const std::string& path, const Tensor& img);

// ---- plain value-space helpers for augmentation and resizing --------------

Tensor crop(const Tensor& img, int top, int left, int h, int w);
Tensor hflip(const Tensor& img);
Tensor resize_nearest(const Tensor& img, int out_h, int out_w);

}  // namespace crformer
