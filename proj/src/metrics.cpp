#include "crformer/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "crformer/color.hpp"
#include "crformer/errors.hpp"
#include "crformer/mask.hpp"

namespace crformer {
namespace {

void check_same_rgb(const Tensor& a, const Tensor& b, const char* what) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != 3 || sa[0] != 3)
        throw DimensionError(std::string(what) + " expects [3,H,W], got " + shape_str(sa));
    if (sa != sb)
        throw DimensionError(std::string(what) + " shape mismatch: " + shape_str(sa) +
                             " vs " + shape_str(sb));
}

int histogram_bin(double v) {
    int bin = static_cast<int>(std::floor(v * 256.0));
    return bin < 0 ? 0 : (bin > 255 ? 255 : bin);
}

}  // namespace

RegionMetrics region_mae(const Tensor& pred, const Tensor& gt, const Tensor& mask) {
    check_same_rgb(pred, gt, "region_mae");
    validate_binary_mask(mask);
    if (mask.dim(1) != pred.dim(1) || mask.dim(2) != pred.dim(2))
        throw DimensionError("region_mae mask " + shape_str(mask.shape()) +
                             " does not match image " + shape_str(pred.shape()));
    const Tensor lp = rgb_to_lab(pred);
    const Tensor lg = rgb_to_lab(gt);
    const std::int64_t plane = static_cast<std::int64_t>(pred.dim(1)) * pred.dim(2);
    const std::vector<double>& p = lp.data();
    const std::vector<double>& g = lg.data();
    const std::vector<double>& m = mask.data();
    double sum_s = 0.0, sum_ns = 0.0;
    std::int64_t n_s = 0, n_ns = 0;
    for (std::int64_t i = 0; i < plane; ++i) {
        double d = std::abs(p[i] - g[i]) + std::abs(p[plane + i] - g[plane + i]) +
                   std::abs(p[2 * plane + i] - g[2 * plane + i]);
        if (m[i] == 1.0) {
            sum_s += d;
            ++n_s;
        } else {
            sum_ns += d;
            ++n_ns;
        }
    }
    RegionMetrics out;
    out.shadow_pixels = n_s;
    out.nonshadow_pixels = n_ns;
    if (n_s > 0) out.shadow_mae = sum_s / (3.0 * static_cast<double>(n_s));
    if (n_ns > 0) out.nonshadow_mae = sum_ns / (3.0 * static_cast<double>(n_ns));
    // The whole-image mean, written as the count-weighted combination of the
    // region means so that identity holds bit-for-bit (and reduces to the
    // surviving region when the other is empty).
    if (n_s == 0)
        out.all_mae = *out.nonshadow_mae;
    else if (n_ns == 0)
        out.all_mae = *out.shadow_mae;
    else
        out.all_mae = (static_cast<double>(n_s) * *out.shadow_mae +
                       static_cast<double>(n_ns) * *out.nonshadow_mae) /
                      static_cast<double>(plane);
    return out;
}

double psnr(const Tensor& pred, const Tensor& gt) {
    check_same_rgb(pred, gt, "psnr");
    const std::vector<double>& p = pred.data();
    const std::vector<double>& g = gt.data();
    double se = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = p[i] - g[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(p.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

double ssim(const Tensor& pred, const Tensor& gt) {
    check_same_rgb(pred, gt, "ssim");
    const int h = pred.dim(1), w = pred.dim(2);
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (h < kWin || w < kWin)
        throw DimensionError("ssim needs at least " + std::to_string(kWin) + "x" +
                             std::to_string(kWin) + " input, got " + shape_str(pred.shape()));
    std::array<double, kWin * kWin> win;
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            double dy = i - (kWin - 1) / 2.0;
            double dx = j - (kWin - 1) / 2.0;
            win[i * kWin + j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
            wsum += win[i * kWin + j];
        }
    }
    for (double& v : win) v /= wsum;

    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& x = pred.data();
    const std::vector<double>& y = gt.data();
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double* xc = &x[c * plane];
        const double* yc = &y[c * plane];
        double acc = 0.0;
        std::int64_t windows = 0;
        for (int top = 0; top + kWin <= h; ++top) {
            for (int left = 0; left + kWin <= w; ++left) {
                double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        double wv = win[i * kWin + j];
                        double xv = xc[static_cast<std::int64_t>(top + i) * w + left + j];
                        double yv = yc[static_cast<std::int64_t>(top + i) * w + left + j];
                        mx += wv * xv;
                        my += wv * yv;
                        mxx += wv * xv * xv;
                        myy += wv * yv * yv;
                        mxy += wv * xv * yv;
                    }
                }
                double vx = mxx - mx * mx;
                double vy = myy - my * my;
                double cov = mxy - mx * my;
                acc += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
                       ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                ++windows;
            }
        }
        total += acc / static_cast<double>(windows);
    }
    return total / 3.0;
}

double otsu_threshold(const Tensor& gray) {
    const std::vector<double>& v = gray.data();
    if (v.empty()) throw DimensionError("otsu_threshold on empty tensor");
    std::array<std::int64_t, 256> hist{};
    for (double x : v) ++hist[histogram_bin(x)];

    int lo = 0, hi = 255;
    while (hist[lo] == 0) ++lo;
    while (hist[hi] == 0) --hi;
    if (lo == hi) {
        std::fprintf(stderr,
                     "warning: otsu_threshold on a constant image (all values in bin %d), "
                     "returning the constant\n", lo);
        return v[0];
    }

    // Between-class variance compared as the exact integer
    // (S0*n1 - S1*n0)^2 scaled by 1/(n0*n1); bin indices and counts stay
    // in int64 so the tie rule is bit-exact and an exhaustive per-pixel
    // recomputation lands on the same threshold.
    const std::int64_t n = static_cast<std::int64_t>(v.size());
    std::int64_t total_s = 0;
    for (int b = 0; b < 256; ++b) total_s += static_cast<std::int64_t>(b) * hist[b];

    int best_t = lo;
    double best_score = -1.0;
    std::int64_t n0 = 0, s0 = 0;
    for (int t = 0; t < 256; ++t) {
        n0 += hist[t];
        s0 += static_cast<std::int64_t>(t) * hist[t];
        const std::int64_t n1 = n - n0;
        if (n0 == 0 || n1 == 0) continue;
        const std::int64_t s1 = total_s - s0;
        const double u = static_cast<double>(s0 * n1 - s1 * n0);
        const double score = u * u / (static_cast<double>(n0) * static_cast<double>(n1));
        if (score > best_score) {
            best_score = score;
            best_t = t;
        }
    }
    // Report the upper edge of the last below-threshold bin: feeding this
    // into a strict-> binarizer reproduces the histogram classes.
    return (best_t + 1) / 256.0;
}

Tensor video_region_split(const Tensor& frame, const Tensor& reference) {
    check_same_rgb(frame, reference, "video_region_split");
    const int h = frame.dim(1), w = frame.dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& f = frame.data();
    const std::vector<double>& r = reference.data();
    Tensor out = Tensor::zeros({1, h, w});
    std::vector<double>& o = out.data();
    for (std::int64_t p = 0; p < plane; ++p) {
        long long sf = 0, sr = 0;
        for (int c = 0; c < 3; ++c) {
            sf += std::llround(f[c * plane + p] * 255.0);
            sr += std::llround(r[c * plane + p] * 255.0);
        }
        // mean(ref) - mean(frame) > 40 on the 8-bit scale, times 3.
        o[p] = (sr - sf > 120) ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace crformer
