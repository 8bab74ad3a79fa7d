#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crformer/attention.hpp"
#include "crformer/rng.hpp"
#include "crformer/tensor.hpp"

namespace crformer {

struct ModelConfig {
    int base_channels = 32;
    int num_blocks = 2;
    int mlp_ratio = 2;
    int residual_block_count = 4;
    int refine_levels = 3;
    double refine_channel_scale = 0.5;
    std::string attention = "rca";  // "rca" or "vanilla"
    std::string key_region = "nonshadow";

    static constexpr int downsample_factor = 4;  // two stride-2 stages

    void validate() const;
    int refine_channels() const;
    // Smallest spatial granularity an input must divide by.
    int spatial_multiple() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

struct ConvLayer {
    Tensor w;  // [Cout,Cin,k,k]
    Tensor b;  // [Cout]
    static ConvLayer init(int cout, int cin, int k, Rng& rng);
    Tensor apply(const Tensor& x, int stride, int padding) const;
};

struct ForwardResult {
    Tensor inner;      // decoder output, full resolution
    Tensor composite;  // mask-blended image
    Tensor refined;    // final output
};

class CRFormerModel {
   public:
    CRFormerModel(const ModelConfig& cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    Tensor encode_nonshadow(const Tensor& image) const;
    Tensor encode_shadow(const Tensor& image, const Tensor& mask) const;
    Tensor run_transformer(const Tensor& fq, const Tensor& fkv, const Tensor& mask_small) const;
    Tensor decode(const Tensor& features) const;
    Tensor refine(const Tensor& composite, const Tensor& mask) const;

    ForwardResult forward(const Tensor& image, const Tensor& mask) const;

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::vector<Tensor> params() const;
    std::int64_t param_count() const;
    void zero_grad();

   private:
    ModelConfig cfg_;
    ConvLayer ns_proj_;                                   // 1x1, 3 -> C
    ConvLayer sh_c0_, sh_c1_, sh_c2_;                     // 4 -> C, then two stride-2
    std::vector<std::pair<ConvLayer, ConvLayer>> sh_res_;
    std::vector<AlignmentBlockParams> blocks_;
    ConvLayer dec_c0_, dec_c1_, dec_head_;
    ConvLayer ref_stem_;
    std::vector<ConvLayer> ref_down_, ref_up_;
    ConvLayer ref_head_;
};

// Versioned flat container: magic line, config JSON, then name/shape/f64
// little-endian data per parameter.
inline constexpr const char* kCheckpointMagic = "crformer-ckpt-v1\n";

void save_checkpoint(const std::string& path, const CRFormerModel& model);
CRFormerModel load_checkpoint(const std::string& path);

}  // namespace crformer
