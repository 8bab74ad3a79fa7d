#include "crformer/attention.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "crformer/errors.hpp"

namespace crformer {

PositionalEmbedding sinusoidal_position_embedding(int h, int w, int c) {
    if (h < 1 || w < 1) throw DimensionError("position embedding: empty grid");
    if (c < 4 || c % 4 != 0) {
        throw ConfigError("position embedding: channel count " + std::to_string(c) +
                          " must be divisible by 4");
    }
    const int half = c / 2;
    std::vector<double> grid(static_cast<size_t>(h) * w * c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double* row = &grid[(static_cast<size_t>(y) * w + x) * c];
            for (int i = 0; i < half; ++i) {
                const double freq = std::pow(10000.0, -2.0 * (i / 2) / half);
                const double vy = y * freq;
                const double vx = x * freq;
                row[i] = (i % 2 == 0) ? std::sin(vy) : std::cos(vy);
                row[half + i] = (i % 2 == 0) ? std::sin(vx) : std::cos(vx);
            }
        }
    }
    PositionalEmbedding pe;
    pe.p_q = Tensor::from_data({h * w, c}, grid);
    pe.p_kv = Tensor::from_data({h * w, c}, std::move(grid));
    return pe;
}

Tensor add_positional(const Tensor& f, const Tensor& p) { return add(f, p); }

KeyRegion key_region_from_string(const std::string& s) {
    if (s == "nonshadow") return KeyRegion::nonshadow;
    if (s == "shadow") return KeyRegion::shadow;
    if (s == "all") return KeyRegion::all;
    throw ConfigError("unknown key region '" + s + "' (want nonshadow, shadow, or all)");
}

std::string key_region_to_string(KeyRegion kr) {
    switch (kr) {
        case KeyRegion::nonshadow: return "nonshadow";
        case KeyRegion::shadow: return "shadow";
        case KeyRegion::all: return "all";
    }
    return "nonshadow";
}

Tensor build_region_bias(const std::vector<std::uint8_t>& ms, KeyRegion keys) {
    const size_t t = ms.size();
    if (t == 0) throw ContractError("region bias: empty mask");
    for (std::uint8_t v : ms) {
        if (v != 0 && v != 1) throw ContractError("region bias: mask entries must be 0 or 1");
    }
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<double> bias(t * t, ninf);
    for (size_t i = 0; i < t; ++i) {
        if (ms[i] != 1) continue;
        double* row = &bias[i * t];
        for (size_t j = 0; j < t; ++j) {
            const bool allowed = keys == KeyRegion::all ||
                                 (keys == KeyRegion::nonshadow ? ms[j] == 0 : ms[j] == 1);
            if (allowed) row[j] = 0.0;
        }
    }
    return Tensor::from_data({static_cast<int>(t), static_cast<int>(t)}, std::move(bias));
}

AttentionResult attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                               const Tensor* bias) {
    if (q.shape().size() != 2 || k.shape().size() != 2 || v.shape().size() != 2) {
        throw DimensionError("attention: Q, K, V must be 2-D");
    }
    if (q.dim(1) != k.dim(1)) {
        throw DimensionError("attention: Q and K disagree on feature width");
    }
    if (k.dim(0) != v.dim(0)) {
        throw DimensionError("attention: K and V disagree on token count");
    }
    if (bias && bias->shape() != Shape{q.dim(0), k.dim(0)}) {
        throw DimensionError("attention: bias must be [Tq,Tk]");
    }
    Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
    if (bias) scores = add(scores, *bias);
    Tensor weights = softmax_lastdim(scores);
    return {matmul(weights, v), weights};
}

AlignmentBlockParams AlignmentBlockParams::init(int c, int mlp_ratio, Rng& rng) {
    if (c < 1 || mlp_ratio < 1) throw ConfigError("alignment block: bad width/ratio");
    const int hidden = c * mlp_ratio;
    auto init_mat = [&rng](int rows, int cols) {
        std::vector<double> v(static_cast<size_t>(rows) * cols);
        for (double& x : v) x = rng.normal(0.0, 0.02);
        return Tensor::from_data({rows, cols}, std::move(v), true);
    };
    AlignmentBlockParams p;
    p.wq = init_mat(c, c);
    p.wk = init_mat(c, c);
    p.wv = init_mat(c, c);
    p.wo = init_mat(c, c);
    p.mlp_w1 = init_mat(c, hidden);
    p.mlp_b1 = Tensor::zeros({hidden}, true);
    p.mlp_w2 = init_mat(hidden, c);
    p.mlp_b2 = Tensor::zeros({c}, true);
    p.ln1_g = Tensor::full({c}, 1.0, true);
    p.ln1_b = Tensor::zeros({c}, true);
    p.ln2_g = Tensor::full({c}, 1.0, true);
    p.ln2_b = Tensor::zeros({c}, true);
    return p;
}

std::vector<Tensor> AlignmentBlockParams::all() const {
    return {wq, wk, wv, wo, mlp_w1, mlp_b1, mlp_w2, mlp_b2, ln1_g, ln1_b, ln2_g, ln2_b};
}

std::vector<std::pair<std::string, Tensor>> AlignmentBlockParams::named(
    const std::string& prefix) const {
    return {{prefix + ".wq", wq},         {prefix + ".wk", wk},
            {prefix + ".wv", wv},         {prefix + ".wo", wo},
            {prefix + ".mlp_w1", mlp_w1}, {prefix + ".mlp_b1", mlp_b1},
            {prefix + ".mlp_w2", mlp_w2}, {prefix + ".mlp_b2", mlp_b2},
            {prefix + ".ln1_g", ln1_g},   {prefix + ".ln1_b", ln1_b},
            {prefix + ".ln2_g", ln2_g},   {prefix + ".ln2_b", ln2_b}};
}

namespace {

void check_streams(const Tensor& fq, const Tensor& fkv, const AlignmentBlockParams& params) {
    if (fq.shape().size() != 2 || fkv.shape().size() != 2) {
        throw DimensionError("attention streams must be [tokens,C]");
    }
    if (fq.dim(1) != fkv.dim(1)) {
        throw DimensionError("attention streams disagree on channels: " + shape_str(fq.shape()) +
                             " vs " + shape_str(fkv.shape()));
    }
    if (params.wq.dim(0) != fq.dim(1)) {
        throw DimensionError("attention params built for C=" + std::to_string(params.wq.dim(0)) +
                             ", features have C=" + std::to_string(fq.dim(1)));
    }
}

}  // namespace

Tensor vanilla_attention(const Tensor& fq, const Tensor& fkv, const AlignmentBlockParams& params) {
    check_streams(fq, fkv, params);
    Tensor q = matmul(fq, params.wq);
    Tensor k = matmul(fkv, params.wk);
    Tensor v = matmul(fkv, params.wv);
    return attention_core(q, k, v).output;
}

Tensor region_cross_attention(const Tensor& fq, const Tensor& fkv,
                              const std::vector<std::uint8_t>& ms,
                              const AlignmentBlockParams& params, KeyRegion keys) {
    check_streams(fq, fkv, params);
    if (static_cast<std::int64_t>(ms.size()) != fq.dim(0) ||
        static_cast<std::int64_t>(ms.size()) != fkv.dim(0)) {
        throw DimensionError("region attention: mask covers " + std::to_string(ms.size()) +
                             " tokens, features have " + std::to_string(fq.dim(0)));
    }
    size_t shadow = 0;
    for (std::uint8_t v : ms) shadow += (v == 1);
    if (shadow == 0) {
        std::fprintf(stderr, "warning: mask has no shadow tokens; attention output is zero\n");
    } else if (shadow == ms.size() && keys == KeyRegion::nonshadow) {
        std::fprintf(stderr, "warning: mask has no non-shadow tokens; attention output is zero\n");
    }
    Tensor bias = build_region_bias(ms, keys);
    Tensor q = matmul(fq, params.wq);
    Tensor k = matmul(fkv, params.wk);
    Tensor v = matmul(fkv, params.wv);
    return attention_core(q, k, v, &bias).output;
}

Tensor cross_region_alignment_block(const Tensor& fq, const Tensor& fkv,
                                    const std::optional<std::vector<std::uint8_t>>& ms,
                                    const AlignmentBlockParams& params, KeyRegion keys) {
    Tensor attn = ms ? region_cross_attention(fq, fkv, *ms, params, keys)
                     : vanilla_attention(fq, fkv, params);
    Tensor y1 = layer_norm(matmul(add(fq, attn), params.wo), params.ln1_g, params.ln1_b, 1e-5);
    Tensor hidden = relu(add_rowvec(matmul(y1, params.mlp_w1), params.mlp_b1));
    Tensor mlp_out = add_rowvec(matmul(hidden, params.mlp_w2), params.mlp_b2);
    return layer_norm(add(y1, mlp_out), params.ln2_g, params.ln2_b, 1e-5);
}

Tensor transformer_layer(const Tensor& fq, const Tensor& fkv,
                         const std::optional<std::vector<std::uint8_t>>& ms,
                         const std::vector<AlignmentBlockParams>& blocks, KeyRegion keys) {
    if (blocks.empty()) throw ConfigError("transformer layer: needs at least one block");
    Tensor x = fq;
    for (const AlignmentBlockParams& b : blocks) {
        x = cross_region_alignment_block(x, fkv, ms, b, keys);
    }
    return x;
}

}  // namespace crformer
