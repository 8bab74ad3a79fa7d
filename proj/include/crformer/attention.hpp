#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crformer/rng.hpp"
#include "crformer/tensor.hpp"

namespace crformer {

// Fixed 2D sinusoidal token embeddings, one grid per attention stream.
struct PositionalEmbedding {
    Tensor p_q;
    Tensor p_kv;
};

PositionalEmbedding sinusoidal_position_embedding(int h, int w, int c);
Tensor add_positional(const Tensor& f, const Tensor& p);

// Which tokens shadow queries may read from (ablation axis).
enum class KeyRegion { nonshadow, shadow, all };

KeyRegion key_region_from_string(const std::string& s);
std::string key_region_to_string(KeyRegion kr);

// Additive bias over token pairs: 0 where a shadow query meets an allowed
// key, -inf everywhere else. Non-shadow queries are always fully masked.
Tensor build_region_bias(const std::vector<std::uint8_t>& ms,
                         KeyRegion keys = KeyRegion::nonshadow);

struct AttentionResult {
    Tensor output;   // [Tq, dv]
    Tensor weights;  // [Tq, Tk] softmax rows
};

// softmax(QK^T/sqrt(d) [+ bias]) V on already-projected inputs.
AttentionResult attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                               const Tensor* bias = nullptr);

// Single-head projections plus the block's projection/MLP/norm parameters.
struct AlignmentBlockParams {
    Tensor wq, wk, wv;        // [C,C]
    Tensor wo;                // [C,C]
    Tensor mlp_w1, mlp_b1;    // [C,rC], [rC]
    Tensor mlp_w2, mlp_b2;    // [rC,C], [C]
    Tensor ln1_g, ln1_b;      // [C]
    Tensor ln2_g, ln2_b;      // [C]

    static AlignmentBlockParams init(int c, int mlp_ratio, Rng& rng);
    std::vector<Tensor> all() const;
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

Tensor vanilla_attention(const Tensor& fq, const Tensor& fkv, const AlignmentBlockParams& params);

// Shadow tokens query non-shadow tokens only; all other rows come back zero.
// Degenerate masks (no shadow or no non-shadow tokens) are legal, yield an
// all-zero result, and print a diagnostic on stderr.
Tensor region_cross_attention(const Tensor& fq, const Tensor& fkv,
                              const std::vector<std::uint8_t>& ms,
                              const AlignmentBlockParams& params,
                              KeyRegion keys = KeyRegion::nonshadow);

// y1 = LN1((fq + attn) Wo); y2 = LN2(y1 + MLP(y1)). The residual joins before
// the projection. Without a mask the attention term is the vanilla baseline.
Tensor cross_region_alignment_block(const Tensor& fq, const Tensor& fkv,
                                    const std::optional<std::vector<std::uint8_t>>& ms,
                                    const AlignmentBlockParams& params,
                                    KeyRegion keys = KeyRegion::nonshadow);

Tensor transformer_layer(const Tensor& fq, const Tensor& fkv,
                         const std::optional<std::vector<std::uint8_t>>& ms,
                         const std::vector<AlignmentBlockParams>& blocks,
                         KeyRegion keys = KeyRegion::nonshadow);

}  // namespace crformer
