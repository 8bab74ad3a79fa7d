#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "crformer/color.hpp"
#include "crformer/errors.hpp"
#include "crformer/metrics.hpp"
#include "crformer/rng.hpp"
#include "crformer/tensor.hpp"

using namespace crformer;

namespace {

Tensor random_rgb(int h, int w, Rng& rng, double lo = 0.1, double hi = 0.9) {
    Tensor t = Tensor::zeros({3, h, w});
    for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
    return t;
}

// Independent scalar L-channel path used only by the gray-axis checks:
// straight-line evaluation of transfer curve, luminance row, cube root.
double gray_l_reference(double srgb) {
    double lin = srgb <= 0.04045 ? srgb / 12.92 : std::pow((srgb + 0.055) / 1.055, 2.4);
    double y = (0.2126729 + 0.7151522 + 0.0721750) * lin;
    double d = 6.0 / 29.0;
    double fy = y > d * d * d ? std::cbrt(y) : y / (3.0 * d * d) + 4.0 / 29.0;
    return 116.0 * fy - 16.0;
}

// Exhaustive per-pixel Otsu search: for every candidate bin, rebuild the
// class sums from scratch in integer arithmetic and keep the first maximum.
double otsu_exhaustive(const std::vector<double>& vals) {
    std::vector<int> bins;
    bins.reserve(vals.size());
    for (double v : vals) {
        int b = static_cast<int>(std::floor(v * 256.0));
        bins.push_back(b < 0 ? 0 : (b > 255 ? 255 : b));
    }
    const std::int64_t n = static_cast<std::int64_t>(bins.size());
    int best_t = -1;
    double best = -1.0;
    for (int t = 0; t < 256; ++t) {
        std::int64_t n0 = 0, s0 = 0, s1 = 0;
        for (int b : bins) {
            if (b <= t) {
                ++n0;
                s0 += b;
            } else {
                s1 += b;
            }
        }
        const std::int64_t n1 = n - n0;
        if (n0 == 0 || n1 == 0) continue;
        const double u = static_cast<double>(s0 * n1 - s1 * n0);
        const double score = u * u / (static_cast<double>(n0) * static_cast<double>(n1));
        if (score > best) {
            best = score;
            best_t = t;
        }
    }
    return (best_t + 1) / 256.0;
}

}  // namespace

TEST_CASE("white maps to L=100 with neutral chroma") {
    auto lab = rgb_to_lab_pixel(1.0, 1.0, 1.0);
    CHECK(lab[0] == doctest::Approx(100.0).epsilon(1e-6));
    CHECK(std::abs(lab[1]) < 0.01);
    CHECK(std::abs(lab[2]) < 0.01);
}

TEST_CASE("black maps to the origin") {
    auto lab = rgb_to_lab_pixel(0.0, 0.0, 0.0);
    CHECK(std::abs(lab[0]) < 1e-10);
    CHECK(std::abs(lab[1]) < 1e-10);
    CHECK(std::abs(lab[2]) < 1e-10);
}

TEST_CASE("mid-gray L matches a straight-line reference evaluation") {
    auto lab = rgb_to_lab_pixel(0.5, 0.5, 0.5);
    CHECK(lab[0] == doctest::Approx(gray_l_reference(0.5)).epsilon(1e-12));
    CHECK(lab[0] == doctest::Approx(53.38896705407974).epsilon(1e-9));
    CHECK(std::abs(lab[1]) < 0.01);
    CHECK(std::abs(lab[2]) < 0.01);
    auto dark = rgb_to_lab_pixel(0.02, 0.02, 0.02);
    CHECK(dark[0] == doctest::Approx(gray_l_reference(0.02)).epsilon(1e-12));
}

TEST_CASE("lab round-trips rgb within 1e-6 per channel") {
    Rng rng(311);
    for (int i = 0; i < 500; ++i) {
        double r = rng.uniform(), g = rng.uniform(), b = rng.uniform();
        auto lab = rgb_to_lab_pixel(r, g, b);
        auto back = lab_to_rgb_pixel(lab[0], lab[1], lab[2]);
        CHECK(std::abs(back[0] - r) < 1e-6);
        CHECK(std::abs(back[1] - g) < 1e-6);
        CHECK(std::abs(back[2] - b) < 1e-6);
    }
}

TEST_CASE("tensor-level conversion matches the pixel path") {
    Rng rng(312);
    Tensor img = random_rgb(5, 7, rng, 0.0, 1.0);
    Tensor lab = rgb_to_lab(img);
    const std::int64_t plane = 5 * 7;
    const auto& in = img.data();
    const auto& out = lab.data();
    for (std::int64_t p = 0; p < plane; ++p) {
        auto px = rgb_to_lab_pixel(in[p], in[plane + p], in[2 * plane + p]);
        CHECK(out[p] == px[0]);
        CHECK(out[plane + p] == px[1]);
        CHECK(out[2 * plane + p] == px[2]);
    }
    Tensor back = lab_to_rgb(lab);
    for (std::int64_t i = 0; i < back.numel(); ++i)
        CHECK(std::abs(back.data()[i] - in[i]) < 1e-6);
}

TEST_CASE("lab L=100 neutral gives white") {
    auto rgb = lab_to_rgb_pixel(100.0, 0.0, 0.0);
    CHECK(rgb[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(rgb[1] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(rgb[2] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("region_mae of identical images is zero everywhere") {
    Rng rng(313);
    Tensor img = random_rgb(6, 6, rng);
    Tensor mask = Tensor::zeros({1, 6, 6});
    for (int i = 0; i < 12; ++i) mask.data()[i] = 1.0;
    RegionMetrics m = region_mae(img, img, mask);
    REQUIRE(m.shadow_mae.has_value());
    REQUIRE(m.nonshadow_mae.has_value());
    CHECK(*m.shadow_mae == 0.0);
    CHECK(*m.nonshadow_mae == 0.0);
    CHECK(m.all_mae == 0.0);
    CHECK(m.shadow_pixels == 12);
    CHECK(m.nonshadow_pixels == 24);
}

TEST_CASE("L-channel shift in the shadow region gives delta over three") {
    Rng rng(314);
    const int h = 8, w = 8;
    Tensor gt = random_rgb(h, w, rng, 0.2, 0.6);
    Tensor mask = Tensor::zeros({1, h, w});
    for (int p = 0; p < h * w; ++p) mask.data()[p] = (p % 3 == 0) ? 1.0 : 0.0;

    const double delta = 3.0;
    Tensor pred = Tensor::zeros({3, h, w});
    const std::int64_t plane = h * w;
    const auto& g = gt.data();
    auto& pd = pred.data();
    for (std::int64_t p = 0; p < plane; ++p) {
        if (mask.data()[p] == 1.0) {
            auto lab = rgb_to_lab_pixel(g[p], g[plane + p], g[2 * plane + p]);
            auto rgb = lab_to_rgb_pixel(lab[0] + delta, lab[1], lab[2]);
            pd[p] = rgb[0];
            pd[plane + p] = rgb[1];
            pd[2 * plane + p] = rgb[2];
        } else {
            pd[p] = g[p];
            pd[plane + p] = g[plane + p];
            pd[2 * plane + p] = g[2 * plane + p];
        }
    }
    RegionMetrics m = region_mae(pred, gt, mask);
    CHECK(std::abs(*m.shadow_mae - delta / 3.0) < 1e-9);
    CHECK(*m.nonshadow_mae == 0.0);
}

TEST_CASE("all-zero mask leaves the shadow slot empty") {
    Rng rng(315);
    Tensor gt = random_rgb(5, 5, rng);
    Tensor pred = random_rgb(5, 5, rng);
    Tensor mask = Tensor::zeros({1, 5, 5});
    RegionMetrics m = region_mae(pred, gt, mask);
    CHECK_FALSE(m.shadow_mae.has_value());
    CHECK(m.shadow_pixels == 0);
    REQUIRE(m.nonshadow_mae.has_value());
    CHECK(m.all_mae == *m.nonshadow_mae);
}

TEST_CASE("region_mae is symmetric and weight-consistent") {
    Rng rng(316);
    Tensor a = random_rgb(7, 9, rng);
    Tensor b = random_rgb(7, 9, rng);
    Tensor mask = Tensor::zeros({1, 7, 9});
    for (int p = 0; p < 63; ++p) mask.data()[p] = (p % 4 == 0) ? 1.0 : 0.0;
    RegionMetrics ab = region_mae(a, b, mask);
    RegionMetrics ba = region_mae(b, a, mask);
    CHECK(*ab.shadow_mae == *ba.shadow_mae);
    CHECK(*ab.nonshadow_mae == *ba.nonshadow_mae);
    CHECK(ab.all_mae == ba.all_mae);

    const double n_s = static_cast<double>(ab.shadow_pixels);
    const double n_ns = static_cast<double>(ab.nonshadow_pixels);
    const double recombined =
        (n_s * *ab.shadow_mae + n_ns * *ab.nonshadow_mae) / (n_s + n_ns);
    CHECK(ab.all_mae == recombined);
}

TEST_CASE("region_mae rejects mismatched shapes") {
    Tensor a = Tensor::zeros({3, 4, 4});
    Tensor b = Tensor::zeros({3, 4, 5});
    Tensor mask = Tensor::zeros({1, 4, 4});
    CHECK_THROWS_AS(region_mae(a, b, mask), DimensionError);
    Tensor small_mask = Tensor::zeros({1, 2, 4});
    CHECK_THROWS_AS(region_mae(a, a, small_mask), DimensionError);
}

TEST_CASE("psnr of identical images is infinite") {
    Rng rng(317);
    Tensor img = random_rgb(6, 6, rng);
    CHECK(std::isinf(psnr(img, img)));
}

TEST_CASE("psnr of a 0.1 offset is 20 dB") {
    Rng rng(318);
    Tensor gt = random_rgb(10, 10, rng, 0.1, 0.8);
    Tensor pred = Tensor::zeros({3, 10, 10});
    for (std::int64_t i = 0; i < gt.numel(); ++i) pred.data()[i] = gt.data()[i] + 0.1;
    CHECK(std::abs(psnr(pred, gt) - 20.0) < 1e-6);
}

TEST_CASE("psnr decreases with noise amplitude") {
    Rng rng(319);
    Tensor gt = random_rgb(8, 8, rng, 0.3, 0.7);
    Tensor small = Tensor::zeros({3, 8, 8});
    Tensor big = Tensor::zeros({3, 8, 8});
    for (std::int64_t i = 0; i < gt.numel(); ++i) {
        double n = rng.uniform() - 0.5;
        small.data()[i] = gt.data()[i] + 0.01 * n;
        big.data()[i] = gt.data()[i] + 0.2 * n;
    }
    CHECK(psnr(small, gt) > psnr(big, gt));
}

TEST_CASE("ssim of identical images is one") {
    Rng rng(320);
    Tensor img = random_rgb(16, 20, rng);
    CHECK(ssim(img, img) == 1.0);
}

TEST_CASE("ssim drops under offset and anti-correlation") {
    const int h = 16, w = 16;
    Tensor base = Tensor::zeros({3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                base.data()[c * h * w + y * w + x] =
                    0.5 + 0.3 * std::sin(0.7 * x + 0.4 * y);
    Tensor offset = Tensor::zeros({3, h, w});
    Tensor inverted = Tensor::zeros({3, h, w});
    for (std::int64_t i = 0; i < base.numel(); ++i) {
        offset.data()[i] = base.data()[i] + 0.1;
        inverted.data()[i] = 1.0 - base.data()[i];
    }
    double s_off = ssim(offset, base);
    double s_inv = ssim(inverted, base);
    CHECK(s_off < 1.0);
    CHECK(s_off > 0.5);
    CHECK(s_inv < s_off);
    CHECK(s_inv < 0.0);
}

TEST_CASE("ssim is symmetric within round-off") {
    Rng rng(321);
    Tensor a = random_rgb(12, 14, rng);
    Tensor b = random_rgb(12, 14, rng);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("ssim rejects images smaller than the window") {
    Tensor a = Tensor::zeros({3, 8, 8});
    CHECK_THROWS_AS(ssim(a, a), DimensionError);
}

TEST_CASE("otsu separates a bimodal histogram") {
    Tensor img = Tensor::zeros({1, 4, 4});
    for (int i = 0; i < 16; ++i) img.data()[i] = (i < 8) ? 0.1 : 0.9;
    double t = otsu_threshold(img);
    CHECK(t > 0.1);
    CHECK(t < 0.9);
}

TEST_CASE("otsu on the fixed 16-pixel array matches the frozen search result") {
    std::vector<double> vals = {0.05, 0.06, 0.07, 0.08, 0.10, 0.12, 0.50, 0.55,
                                0.60, 0.80, 0.82, 0.85, 0.90, 0.93, 0.95, 1.00};
    Tensor img = Tensor::from_data({1, 4, 4}, vals);
    double t = otsu_threshold(img);
    CHECK(t == 31.0 / 256.0);
    CHECK(t == otsu_exhaustive(vals));
}

TEST_CASE("otsu equals the exhaustive oracle on random histograms") {
    Rng rng(322);
    for (int rep = 0; rep < 30; ++rep) {
        int n = 16 + static_cast<int>(rng.uniform() * 200);
        std::vector<double> vals(static_cast<std::size_t>(n));
        for (double& v : vals) {
            double u = rng.uniform();
            // Mixture shapes: uniform, squashed-dark, two-cluster.
            if (rep % 3 == 0)
                v = u;
            else if (rep % 3 == 1)
                v = u * u;
            else
                v = (rng.uniform() < 0.4) ? 0.15 * u : 0.6 + 0.4 * u;
        }
        Tensor img = Tensor::from_data({1, 1, n}, vals);
        CHECK(otsu_threshold(img) == otsu_exhaustive(vals));
    }
}

TEST_CASE("otsu tie resolves to the lowest threshold") {
    Tensor img = Tensor::from_data({1, 1, 2}, {0.0, 1.0});
    CHECK(otsu_threshold(img) == 1.0 / 256.0);
}

TEST_CASE("otsu on a constant image returns the constant") {
    Tensor img = Tensor::full({1, 3, 3}, 0.42);
    CHECK(otsu_threshold(img) == 0.42);
}

TEST_CASE("video split marks nothing on identical frames") {
    Rng rng(323);
    Tensor frame = random_rgb(5, 5, rng);
    Tensor mask = video_region_split(frame, frame);
    for (double v : mask.data()) CHECK(v == 0.0);
}

TEST_CASE("video split marks everything at 50 levels darker") {
    Tensor ref = Tensor::full({3, 4, 4}, 150.0 / 255.0);
    Tensor frame = Tensor::full({3, 4, 4}, 100.0 / 255.0);
    Tensor mask = video_region_split(frame, ref);
    for (double v : mask.data()) CHECK(v == 1.0);
}

TEST_CASE("exactly 40 levels darker stays non-shadow") {
    Tensor ref = Tensor::full({3, 4, 4}, 140.0 / 255.0);
    Tensor frame = Tensor::full({3, 4, 4}, 100.0 / 255.0);
    Tensor mask = video_region_split(frame, ref);
    for (double v : mask.data()) CHECK(v == 0.0);
}

TEST_CASE("video split uses the channel mean with an exact boundary") {
    Tensor ref = Tensor::zeros({3, 1, 2});
    Tensor frame = Tensor::zeros({3, 1, 2});
    // Pixel 0: reference sums to 420 vs 300, mean difference exactly 40.
    // Pixel 1: 421 vs 300, mean difference just over 40.
    double r0[3] = {140, 141, 139}, r1[3] = {141, 141, 139};
    for (int c = 0; c < 3; ++c) {
        ref.data()[c * 2 + 0] = r0[c] / 255.0;
        ref.data()[c * 2 + 1] = r1[c] / 255.0;
        frame.data()[c * 2 + 0] = 100.0 / 255.0;
        frame.data()[c * 2 + 1] = 100.0 / 255.0;
    }
    Tensor mask = video_region_split(frame, ref);
    CHECK(mask.data()[0] == 0.0);
    CHECK(mask.data()[1] == 1.0);
}

TEST_CASE("video split rejects mismatched dims") {
    Tensor a = Tensor::zeros({3, 4, 4});
    Tensor b = Tensor::zeros({3, 4, 5});
    CHECK_THROWS_AS(video_region_split(a, b), DimensionError);
}
