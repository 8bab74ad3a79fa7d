#include "crformer/model.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

#include "crformer/errors.hpp"
#include "crformer/mask.hpp"

namespace crformer {

void ModelConfig::validate() const {
    if (base_channels < 4 || base_channels % 4 != 0) {
        throw ConfigError("base_channels must be a positive multiple of 4, got " +
                          std::to_string(base_channels));
    }
    if (num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
    if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
    if (residual_block_count < 0) throw ConfigError("residual_block_count must be >= 0");
    if (refine_levels < 1) throw ConfigError("refine_levels must be >= 1");
    if (refine_channel_scale <= 0.0) throw ConfigError("refine_channel_scale must be positive");
    if (refine_channels() < 1) throw ConfigError("refine_channel_scale leaves no channels");
    if (attention != "rca" && attention != "vanilla") {
        throw ConfigError("attention must be 'rca' or 'vanilla', got '" + attention + "'");
    }
    key_region_from_string(key_region);
}

int ModelConfig::refine_channels() const {
    return static_cast<int>(base_channels * refine_channel_scale);
}

int ModelConfig::spatial_multiple() const {
    return std::max(downsample_factor, 1 << refine_levels);
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["base_channels"] = base_channels;
    j["num_blocks"] = num_blocks;
    j["mlp_ratio"] = mlp_ratio;
    j["residual_block_count"] = residual_block_count;
    j["refine_levels"] = refine_levels;
    j["refine_channel_scale"] = refine_channel_scale;
    j["attention"] = attention;
    j["key_region"] = key_region;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
    ModelConfig d;
    ModelConfig c;
    try {
        c.base_channels = j.value("base_channels", d.base_channels);
        c.num_blocks = j.value("num_blocks", d.num_blocks);
        c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
        c.residual_block_count = j.value("residual_block_count", d.residual_block_count);
        c.refine_levels = j.value("refine_levels", d.refine_levels);
        c.refine_channel_scale = j.value("refine_channel_scale", d.refine_channel_scale);
        c.attention = j.value("attention", d.attention);
        c.key_region = j.value("key_region", d.key_region);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config field: ") + e.what());
    }
    c.validate();
    return c;
}

ConvLayer ConvLayer::init(int cout, int cin, int k, Rng& rng) {
    std::vector<double> w(static_cast<size_t>(cout) * cin * k * k);
    for (double& v : w) v = rng.normal(0.0, 0.02);
    ConvLayer layer;
    layer.w = Tensor::from_data({cout, cin, k, k}, std::move(w), true);
    layer.b = Tensor::zeros({cout}, true);
    return layer;
}

Tensor ConvLayer::apply(const Tensor& x, int stride, int padding) const {
    return bias_add_channel(conv2d(x, w, stride, padding), b);
}

CRFormerModel::CRFormerModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int c = cfg_.base_channels;
    ns_proj_ = ConvLayer::init(c, 3, 1, rng);
    sh_c0_ = ConvLayer::init(c, 4, 3, rng);
    sh_c1_ = ConvLayer::init(c, c, 3, rng);
    sh_c2_ = ConvLayer::init(c, c, 3, rng);
    for (int i = 0; i < cfg_.residual_block_count; ++i) {
        sh_res_.emplace_back(ConvLayer::init(c, c, 3, rng), ConvLayer::init(c, c, 3, rng));
    }
    for (int i = 0; i < cfg_.num_blocks; ++i) {
        blocks_.push_back(AlignmentBlockParams::init(c, cfg_.mlp_ratio, rng));
    }
    dec_c0_ = ConvLayer::init(c, c, 3, rng);
    dec_c1_ = ConvLayer::init(c, c, 3, rng);
    dec_head_ = ConvLayer::init(3, c, 3, rng);
    const int rc = cfg_.refine_channels();
    ref_stem_ = ConvLayer::init(rc, 4, 3, rng);
    for (int i = 0; i < cfg_.refine_levels; ++i) {
        ref_down_.push_back(ConvLayer::init(rc, rc, 3, rng));
        ref_up_.push_back(ConvLayer::init(rc, rc, 3, rng));
    }
    ref_head_ = ConvLayer::init(3, rc, 3, rng);
}

namespace {

void check_image(const Tensor& image) {
    if (image.shape().size() != 3 || image.dim(0) != 3) {
        throw DimensionError("expected a [3,H,W] image, got " + shape_str(image.shape()));
    }
}

void check_divisible(const Tensor& image, int mult, const char* who) {
    if (image.dim(1) % mult != 0 || image.dim(2) % mult != 0) {
        throw DimensionError(std::string(who) + ": spatial dims " + shape_str(image.shape()) +
                             " must divide by " + std::to_string(mult));
    }
}

}  // namespace

Tensor CRFormerModel::encode_nonshadow(const Tensor& image) const {
    check_image(image);
    check_divisible(image, ModelConfig::downsample_factor, "encode_nonshadow");
    Tensor x = avg_pool_conv(image, 3, 2, 1);
    x = avg_pool_conv(x, 3, 2, 1);
    return relu(ns_proj_.apply(x, 1, 0));
}

Tensor CRFormerModel::encode_shadow(const Tensor& image, const Tensor& mask) const {
    check_image(image);
    check_divisible(image, ModelConfig::downsample_factor, "encode_shadow");
    validate_binary_mask(mask);
    if (mask.dim(1) != image.dim(1) || mask.dim(2) != image.dim(2)) {
        throw DimensionError("mask " + shape_str(mask.shape()) + " does not match image " +
                             shape_str(image.shape()));
    }
    Tensor x = concat_channels(image, mask);
    x = relu(sh_c0_.apply(x, 1, 1));
    x = relu(sh_c1_.apply(x, 2, 1));
    x = relu(sh_c2_.apply(x, 2, 1));
    for (const auto& [a, b] : sh_res_) {
        Tensor t = b.apply(relu(a.apply(x, 1, 1)), 1, 1);
        x = add(x, t);
    }
    return x;
}

Tensor CRFormerModel::run_transformer(const Tensor& fq, const Tensor& fkv,
                                      const Tensor& mask_small) const {
    if (fq.shape() != fkv.shape()) {
        throw DimensionError("encoder streams disagree: " + shape_str(fq.shape()) + " vs " +
                             shape_str(fkv.shape()));
    }
    const int h = fq.dim(1), w = fq.dim(2);
    PositionalEmbedding pe = sinusoidal_position_embedding(h, w, fq.dim(0));
    Tensor fq_tok = add_positional(chw_to_tokens(fq), pe.p_q);
    Tensor fkv_tok = add_positional(chw_to_tokens(fkv), pe.p_kv);
    std::optional<std::vector<std::uint8_t>> ms;
    if (cfg_.attention == "rca") ms = flatten_mask(mask_small);
    Tensor out = transformer_layer(fq_tok, fkv_tok, ms, blocks_,
                                   key_region_from_string(cfg_.key_region));
    return tokens_to_chw(out, h, w);
}

Tensor CRFormerModel::decode(const Tensor& features) const {
    if (features.shape().size() != 3 || features.dim(0) != cfg_.base_channels) {
        throw DimensionError("decode: features must be [C,h,w] with C=" +
                             std::to_string(cfg_.base_channels));
    }
    Tensor x = relu(dec_c0_.apply(upsample_nearest2x(features), 1, 1));
    x = relu(dec_c1_.apply(upsample_nearest2x(x), 1, 1));
    return sigmoid(dec_head_.apply(x, 1, 1));
}

Tensor CRFormerModel::refine(const Tensor& composite, const Tensor& mask) const {
    check_image(composite);
    validate_binary_mask(mask);
    check_divisible(composite, 1 << cfg_.refine_levels, "refine");
    Tensor x = relu(ref_stem_.apply(concat_channels(composite, mask), 1, 1));
    std::vector<Tensor> skips;
    skips.push_back(x);
    for (int i = 0; i < cfg_.refine_levels; ++i) {
        x = relu(ref_down_[static_cast<size_t>(i)].apply(x, 2, 1));
        if (i + 1 < cfg_.refine_levels) skips.push_back(x);
    }
    for (int i = cfg_.refine_levels - 1; i >= 0; --i) {
        x = relu(ref_up_[static_cast<size_t>(i)].apply(upsample_nearest2x(x), 1, 1));
        x = add(x, skips[static_cast<size_t>(i)]);
    }
    return sigmoid(ref_head_.apply(x, 1, 1));
}

ForwardResult CRFormerModel::forward(const Tensor& image, const Tensor& mask) const {
    check_image(image);
    check_divisible(image, cfg_.spatial_multiple(), "forward");
    Tensor fkv = encode_nonshadow(image);
    Tensor fq = encode_shadow(image, mask);
    Tensor ms_small = downsample_mask(mask, ModelConfig::downsample_factor);
    Tensor t = run_transformer(fq, fkv, ms_small);
    ForwardResult r;
    r.inner = decode(t);
    r.composite = composite_blend(r.inner, image, mask);
    r.refined = refine(r.composite, mask);
    return r;
}

std::vector<std::pair<std::string, Tensor>> CRFormerModel::named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto add_layer = [&out](const std::string& name, const ConvLayer& l) {
        out.emplace_back(name + ".w", l.w);
        out.emplace_back(name + ".b", l.b);
    };
    add_layer("nonshadow.proj", ns_proj_);
    add_layer("shadow.c0", sh_c0_);
    add_layer("shadow.c1", sh_c1_);
    add_layer("shadow.c2", sh_c2_);
    for (size_t i = 0; i < sh_res_.size(); ++i) {
        add_layer("shadow.res" + std::to_string(i) + ".a", sh_res_[i].first);
        add_layer("shadow.res" + std::to_string(i) + ".b", sh_res_[i].second);
    }
    for (size_t i = 0; i < blocks_.size(); ++i) {
        for (auto& [name, t] : blocks_[i].named("block" + std::to_string(i))) {
            out.emplace_back(name, t);
        }
    }
    add_layer("decoder.c0", dec_c0_);
    add_layer("decoder.c1", dec_c1_);
    add_layer("decoder.head", dec_head_);
    add_layer("refine.stem", ref_stem_);
    for (size_t i = 0; i < ref_down_.size(); ++i) {
        add_layer("refine.down" + std::to_string(i), ref_down_[i]);
        add_layer("refine.up" + std::to_string(i), ref_up_[i]);
    }
    add_layer("refine.head", ref_head_);
    return out;
}

std::vector<Tensor> CRFormerModel::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

std::int64_t CRFormerModel::param_count() const {
    std::int64_t n = 0;
    for (const Tensor& t : params()) n += t.numel();
    return n;
}

void CRFormerModel::zero_grad() {
    for (Tensor& t : params()) t.zero_grad();
}

// ---- checkpoint -----------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct ByteReader {
    const std::string& buf;
    size_t at = 0;
    void need(size_t n) const {
        if (at + n > buf.size()) throw IoError("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
        at += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
        at += 8;
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(at, n);
        at += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const CRFormerModel& model) {
    std::string out;
    out += kCheckpointMagic;
    const std::string cfg = model.config().to_json();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    const auto named = model.named_params();
    put_u32(out, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t.shape().size()));
        for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.data()) put_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write on checkpoint: " + path);
}

CRFormerModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string magic = kCheckpointMagic;
    if (buf.size() < magic.size() || buf.compare(0, magic.size(), magic) != 0) {
        throw VersionError("unrecognized checkpoint header in " + path);
    }
    ByteReader r{buf, magic.size()};
    const std::uint32_t cfg_len = r.u32();
    ModelConfig cfg = ModelConfig::from_json(r.bytes(cfg_len));
    Rng scratch(0);
    CRFormerModel model(cfg, scratch);
    auto named = model.named_params();
    const std::uint32_t count = r.u32();
    if (count != named.size()) {
        throw IoError("checkpoint lists " + std::to_string(count) + " parameters, model has " +
                      std::to_string(named.size()));
    }
    for (auto& [name, t] : named) {
        const std::uint32_t name_len = r.u32();
        const std::string got = r.bytes(name_len);
        if (got != name) {
            throw IoError("checkpoint parameter '" + got + "' does not match expected '" + name + "'");
        }
        const std::uint32_t ndims = r.u32();
        Shape shape(ndims);
        for (auto& d : shape) d = static_cast<int>(r.u32());
        if (shape != t.shape()) {
            throw IoError("checkpoint shape mismatch for '" + name + "'");
        }
        for (double& v : t.data()) v = r.f64();
    }
    if (r.at != buf.size()) throw IoError("trailing bytes in checkpoint " + path);
    return model;
}

}  // namespace crformer
