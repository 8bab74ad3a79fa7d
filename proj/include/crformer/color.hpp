#pragma once

#include <array>

#include "crformer/tensor.hpp"

namespace crformer {

// sRGB <-> CIELAB under the D65 white point. Forward path is the standard
// piecewise 2.4-exponent transfer into linear RGB, the sRGB/D65 matrix into
// XYZ, then the CIE f() cube-root mapping. The inverse uses the numerically
// inverted forward matrix so a full round trip stays well inside 1e-6 per
// channel. Values outside [0,1] pass through the same formulas unclamped.

std::array<double, 3> rgb_to_lab_pixel(double r, double g, double b);
std::array<double, 3> lab_to_rgb_pixel(double l, double a, double b);

// [3,H,W] sRGB in [0,1] -> [3,H,W] with channels L, a, b.
Tensor rgb_to_lab(const Tensor& rgb);

// [3,H,W] LAB -> [3,H,W] sRGB.
Tensor lab_to_rgb(const Tensor& lab);

}  // namespace crformer
