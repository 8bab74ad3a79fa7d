#pragma once

#include <cstdint>
#include <string>

#include "crformer/rng.hpp"
#include "crformer/tensor.hpp"

namespace crformer {

// Recipe for a synthetic shadow dataset: textured backgrounds darkened
// inside a random polygon, with the polygon raster as the exact mask.
struct SyntheticShadowSpec {
    int height = 64;
    int width = 64;
    int count = 4;
    // Multiplicative darkening strength a; per-channel factor is
    // 1 - (1-a)*(1+tint_c) with tint_c in [-0.08, 0.08], so a=1 keeps the
    // image bit-identical and smaller a darkens more.
    double attenuation_lo = 0.3;
    double attenuation_hi = 0.7;
    double area_lo = 0.05;  // polygon area as a fraction of the image
    double area_hi = 0.60;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticTriplet {
    Tensor shadow_free;  // [3,H,W]
    Tensor shadow;       // [3,H,W]
    Tensor mask;         // [1,H,W] in {0,1}
};

// One triplet from the given stream. Deterministic for a given rng state;
// composite of (shadow_free, shadow, mask) restores shadow_free bitwise
// because pixels outside the polygon are never touched.
SyntheticTriplet make_synthetic_triplet(const SyntheticShadowSpec& spec, Rng& rng);

// Writes count triplets as out_root/{shadow,shadow_free,mask}/NNN.png.
// Same spec (including seed) twice -> byte-identical files.
void write_synthetic_dataset(const SyntheticShadowSpec& spec, const std::string& out_root);

}  // namespace crformer
