#include "crformer/mask.hpp"

#include "crformer/errors.hpp"

namespace crformer {

void validate_binary_mask(const Tensor& mask) {
    if (mask.shape().size() != 3 || mask.dim(0) != 1) {
        throw ContractError("mask must be [1,H,W], got " + shape_str(mask.shape()));
    }
    for (double v : mask.data()) {
        if (v != 0.0 && v != 1.0) {
            throw ContractError("mask holds a non-binary value " + std::to_string(v));
        }
    }
}

Tensor binarize_mask(const Tensor& gray, double threshold) {
    if (gray.shape().size() != 3 || gray.dim(0) != 1) {
        throw ContractError("binarize_mask: input must be [1,H,W], got " + shape_str(gray.shape()));
    }
    std::vector<double> out(gray.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = gray.data()[i] > threshold ? 1.0 : 0.0;
    return Tensor::from_data(gray.shape(), std::move(out));
}

Tensor downsample_mask(const Tensor& mask, int factor) {
    validate_binary_mask(mask);
    if (factor < 1) throw DimensionError("downsample_mask: factor must be >= 1");
    const int H = mask.dim(1), W = mask.dim(2);
    if (H % factor != 0 || W % factor != 0) {
        throw DimensionError("downsample_mask: " + std::to_string(H) + "x" + std::to_string(W) +
                             " not divisible by " + std::to_string(factor));
    }
    const int Ho = H / factor, Wo = W / factor;
    std::vector<double> out(static_cast<size_t>(Ho) * Wo, 0.0);
    const auto& mv = mask.data();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (mv[static_cast<size_t>(y) * W + x] == 1.0) {
                out[static_cast<size_t>(y / factor) * Wo + x / factor] = 1.0;
            }
        }
    }
    return Tensor::from_data({1, Ho, Wo}, std::move(out));
}

std::vector<std::uint8_t> flatten_mask(const Tensor& mask) {
    validate_binary_mask(mask);
    std::vector<std::uint8_t> out(mask.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = mask.data()[i] == 1.0 ? 1 : 0;
    return out;
}

double shadow_fraction(const Tensor& mask) {
    validate_binary_mask(mask);
    double acc = 0.0;
    for (double v : mask.data()) acc += v;
    return acc / static_cast<double>(mask.data().size());
}

}  // namespace crformer
