#include "crformer/color.hpp"

#include <cmath>

#include "crformer/errors.hpp"

namespace crformer {
namespace {

// sRGB (IEC 61966-2-1) linear-light matrix, D65. Row sums give the white
// point (0.95047, 1.0, 1.08883).
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;

// Inverse of kRgbToXyz computed once at full double precision; using the
// exact inverse (rather than the usual 7-digit published matrix) is what
// keeps lab_to_rgb(rgb_to_lab(x)) at round-off level.
const double (&xyz_to_rgb_matrix())[3][3] {
    static double inv[3][3];
    static const bool init = [] {
        const auto& m = kRgbToXyz;
        double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
        inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
        inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
        inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
        inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
        inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
        inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
        return true;
    }();
    (void)init;
    return inv;
}

double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

constexpr double kDelta = 6.0 / 29.0;

double lab_f(double t) {
    return t > kDelta * kDelta * kDelta ? std::cbrt(t)
                                        : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double u) {
    return u > kDelta ? u * u * u : 3.0 * kDelta * kDelta * (u - 4.0 / 29.0);
}

void check_chw3(const Tensor& img, const char* what) {
    const Shape& s = img.shape();
    if (s.size() != 3 || s[0] != 3)
        throw DimensionError(std::string(what) + " expects a [3,H,W] tensor, got " +
                             shape_str(s));
}

}  // namespace

std::array<double, 3> rgb_to_lab_pixel(double r, double g, double b) {
    const double lr = srgb_to_linear(r);
    const double lg = srgb_to_linear(g);
    const double lb = srgb_to_linear(b);
    const auto& m = kRgbToXyz;
    const double x = m[0][0] * lr + m[0][1] * lg + m[0][2] * lb;
    const double y = m[1][0] * lr + m[1][1] * lg + m[1][2] * lb;
    const double z = m[2][0] * lr + m[2][1] * lg + m[2][2] * lb;
    const double fx = lab_f(x / kXn);
    const double fy = lab_f(y / kYn);
    const double fz = lab_f(z / kZn);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::array<double, 3> lab_to_rgb_pixel(double l, double a, double b) {
    const double fy = (l + 16.0) / 116.0;
    const double fx = fy + a / 500.0;
    const double fz = fy - b / 200.0;
    const double x = kXn * lab_f_inv(fx);
    const double y = kYn * lab_f_inv(fy);
    const double z = kZn * lab_f_inv(fz);
    const auto& inv = xyz_to_rgb_matrix();
    const double lr = inv[0][0] * x + inv[0][1] * y + inv[0][2] * z;
    const double lg = inv[1][0] * x + inv[1][1] * y + inv[1][2] * z;
    const double lb = inv[2][0] * x + inv[2][1] * y + inv[2][2] * z;
    return {linear_to_srgb(lr), linear_to_srgb(lg), linear_to_srgb(lb)};
}

Tensor rgb_to_lab(const Tensor& rgb) {
    check_chw3(rgb, "rgb_to_lab");
    const int h = rgb.dim(1), w = rgb.dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& in = rgb.data();
    Tensor out = Tensor::zeros({3, h, w});
    std::vector<double>& o = out.data();
    for (std::int64_t p = 0; p < plane; ++p) {
        const auto lab = rgb_to_lab_pixel(in[p], in[plane + p], in[2 * plane + p]);
        o[p] = lab[0];
        o[plane + p] = lab[1];
        o[2 * plane + p] = lab[2];
    }
    return out;
}

Tensor lab_to_rgb(const Tensor& lab) {
    check_chw3(lab, "lab_to_rgb");
    const int h = lab.dim(1), w = lab.dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& in = lab.data();
    Tensor out = Tensor::zeros({3, h, w});
    std::vector<double>& o = out.data();
    for (std::int64_t p = 0; p < plane; ++p) {
        const auto rgb = lab_to_rgb_pixel(in[p], in[plane + p], in[2 * plane + p]);
        o[p] = rgb[0];
        o[plane + p] = rgb[1];
        o[2 * plane + p] = rgb[2];
    }
    return out;
}

}  // namespace crformer
