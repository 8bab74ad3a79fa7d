#include "crformer/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "crformer/errors.hpp"
#include "crformer/image.hpp"

namespace fs = std::filesystem;

namespace crformer {
namespace {

// Smooth multi-sinusoid texture plus blocky noise, kept inside [0.15, 0.95]
// so attenuation never clips against the PNG range.
Tensor textured_background(int h, int w, Rng& rng) {
    struct Wave {
        double fx, fy, phase, amp;
    };
    Tensor img = Tensor::zeros({3, h, w});
    std::vector<double>& o = img.data();
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (int c = 0; c < 3; ++c) {
        std::vector<Wave> waves(3);
        for (Wave& wv : waves) {
            wv.fx = rng.uniform(0.04, 0.22);
            wv.fy = rng.uniform(0.04, 0.22);
            wv.phase = rng.uniform(0.0, 2.0 * M_PI);
            wv.amp = rng.uniform(0.01, 0.04);
        }
        const double base = rng.uniform(0.45, 0.65);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = base;
                for (const Wave& wv : waves)
                    v += wv.amp * std::sin(wv.fx * x + wv.fy * y + wv.phase);
                o[c * plane + static_cast<std::int64_t>(y) * w + x] = v;
            }
    }
    // Coarse 4x4 value noise shared across channels.
    const int cell = 4;
    const int gh = (h + cell - 1) / cell, gw = (w + cell - 1) / cell;
    std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
    for (double& g : grid) g = rng.uniform(-0.02, 0.02);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double g = grid[static_cast<std::size_t>(y / cell) * gw + x / cell];
            for (int c = 0; c < 3; ++c) {
                double& v = o[c * plane + static_cast<std::int64_t>(y) * w + x];
                v += g;
                v = v < 0.15 ? 0.15 : (v > 0.95 ? 0.95 : v);
            }
        }
    return img;
}

// Star-shaped polygon around a random center; even-odd rasterization.
Tensor polygon_mask(int h, int w, Rng& rng) {
    const int nv = static_cast<int>(rng.uniform_int(5, 10));
    const double cy = rng.uniform(0.30, 0.70) * h;
    const double cx = rng.uniform(0.30, 0.70) * w;
    const double base_r = rng.uniform(0.14, 0.42) * std::min(h, w);
    std::vector<double> px(static_cast<std::size_t>(nv)), py(static_cast<std::size_t>(nv));
    for (int k = 0; k < nv; ++k) {
        const double ang =
            2.0 * M_PI * (k + rng.uniform(-0.25, 0.25)) / nv;
        const double r = base_r * rng.uniform(0.70, 1.30);
        py[static_cast<std::size_t>(k)] = cy + r * std::sin(ang);
        px[static_cast<std::size_t>(k)] = cx + r * std::cos(ang);
    }
    Tensor mask = Tensor::zeros({1, h, w});
    std::vector<double>& m = mask.data();
    for (int y = 0; y < h; ++y) {
        const double fy = y + 0.5;
        for (int x = 0; x < w; ++x) {
            const double fx = x + 0.5;
            bool inside = false;
            for (int i = 0, j = nv - 1; i < nv; j = i++) {
                const bool crosses = (py[i] > fy) != (py[j] > fy);
                if (crosses &&
                    fx < (px[j] - px[i]) * (fy - py[i]) / (py[j] - py[i]) + px[i])
                    inside = !inside;
            }
            m[static_cast<std::int64_t>(y) * w + x] = inside ? 1.0 : 0.0;
        }
    }
    return mask;
}

}  // namespace

void SyntheticShadowSpec::validate() const {
    if (height <= 0 || width <= 0) throw ConfigError("synth: image size must be positive");
    if (count <= 0) throw ConfigError("synth: sample count must be positive");
    if (!(attenuation_lo > 0.0) || attenuation_lo > attenuation_hi || attenuation_hi > 1.0)
        throw ConfigError("synth: attenuation range must satisfy 0 < lo <= hi <= 1");
    if (!(area_lo > 0.0) || area_lo > area_hi || area_hi > 1.0)
        throw ConfigError("synth: polygon area range must satisfy 0 < lo <= hi <= 1");
}

SyntheticTriplet make_synthetic_triplet(const SyntheticShadowSpec& spec, Rng& rng) {
    spec.validate();
    const int h = spec.height, w = spec.width;
    SyntheticTriplet t;
    t.shadow_free = textured_background(h, w, rng);

    const double total = static_cast<double>(h) * w;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 200)
            throw ConfigError("synth: could not hit the polygon area window after 200 tries");
        t.mask = polygon_mask(h, w, rng);
        double area = 0.0;
        for (double v : t.mask.data()) area += v;
        const double frac = area / total;
        if (frac >= spec.area_lo && frac <= spec.area_hi) break;
    }

    const double a = rng.uniform(spec.attenuation_lo, spec.attenuation_hi);
    double factor[3];
    for (double& f : factor) f = 1.0 - (1.0 - a) * (1.0 + rng.uniform(-0.08, 0.08));

    t.shadow = Tensor::zeros({3, h, w});
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& gt = t.shadow_free.data();
    const std::vector<double>& m = t.mask.data();
    std::vector<double>& s = t.shadow.data();
    for (int c = 0; c < 3; ++c)
        for (std::int64_t p = 0; p < plane; ++p)
            s[c * plane + p] =
                m[p] == 1.0 ? gt[c * plane + p] * factor[c] : gt[c * plane + p];
    return t;
}

void write_synthetic_dataset(const SyntheticShadowSpec& spec, const std::string& out_root) {
    spec.validate();
    std::error_code ec;
    for (const char* sub : {"shadow", "shadow_free", "mask"}) {
        fs::create_directories(fs::path(out_root) / sub, ec);
        if (ec)
            throw IoError("cannot create '" + (fs::path(out_root) / sub).string() +
                          "': " + ec.message());
    }
    Rng rng(spec.seed);
    for (int i = 0; i < spec.count; ++i) {
        SyntheticTriplet t = make_synthetic_triplet(spec, rng);
        char name[16];
        std::snprintf(name, sizeof(name), "%03d.png", i);
        save_image((fs::path(out_root) / "shadow" / name).string(), t.shadow);
        save_image((fs::path(out_root) / "shadow_free" / name).string(), t.shadow_free);
        save_image((fs::path(out_root) / "mask" / name).string(), t.mask);
    }
}

}  // namespace crformer
