#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "crformer/attention_oracle.hpp"
#include "crformer/config.hpp"
#include "crformer/dataset.hpp"
#include "crformer/errors.hpp"
#include "crformer/gradcheck.hpp"
#include "crformer/image.hpp"
#include "crformer/losses.hpp"
#include "crformer/mask.hpp"
#include "crformer/metrics.hpp"
#include "crformer/model.hpp"
#include "crformer/rng.hpp"
#include "crformer/synth.hpp"
#include "crformer/tensor.hpp"
#include "crformer/trainer.hpp"

namespace fs = std::filesystem;
using namespace crformer;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
}

void check_divisible(const Tensor& image, const ModelConfig& cfg) {
    const int mult = cfg.spatial_multiple();
    if (image.dim(1) % mult != 0 || image.dim(2) % mult != 0)
        throw DimensionError("input " + shape_str(image.shape()) +
                             " must have height and width divisible by " +
                             std::to_string(mult));
}

std::string opt_str(const std::optional<double>& v) {
    return v ? fmt_g17(*v) : std::string("undefined");
}

struct SynthArgs {
    std::string out;
    SyntheticShadowSpec spec;
};

int run_synth(const SynthArgs& a) {
    write_synthetic_dataset(a.spec, a.out);
    std::cout << "wrote " << a.spec.count << " triplets (" << a.spec.height << "x"
              << a.spec.width << ") to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out = ".";
    std::string config_path;
    std::string profile = "desk";
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
};

int run_train(const TrainArgs& a) {
    RunConfig cfg = profile_by_name(a.profile);
    if (!a.config_path.empty())
        cfg = RunConfig::from_json_over(read_text(a.config_path), cfg);
    if (a.seed) cfg.seed = *a.seed;
    if (a.epochs) cfg.epochs = *a.epochs;
    cfg.validate();

    ensure_dir(a.out);
    DatasetIndex data = index_dataset(a.data, "train");
    if (data.empty()) throw IoError("no triplets found under '" + a.data + "'");

    Rng master(cfg.seed);
    Rng init_rng = master.fork(1);
    CRFormerModel model(cfg.model, init_rng);

    std::ofstream log((fs::path(a.out) / "loss.log").string(), std::ios::binary);
    if (!log) throw IoError("cannot write loss log under '" + a.out + "'");
    Trainer trainer(model, cfg);
    trainer.run(data, log);

    const std::string ckpt = (fs::path(a.out) / "checkpoint.ckpt").string();
    save_checkpoint(ckpt, model);
    write_text((fs::path(a.out) / "config.json").string(), cfg.to_json());
    std::cout << "trained " << trainer.steps() << " steps on " << data.size()
              << " images; checkpoint at " << ckpt << "\n";
    return 0;
}

struct InferArgs {
    std::string ckpt, image, mask, gt;
    std::string out = ".";
};

int run_infer(const InferArgs& a) {
    CRFormerModel model = load_checkpoint(a.ckpt);
    Tensor image = load_image(a.image);
    Tensor mask = binarize_mask(load_image_gray(a.mask), 0.5);
    if (mask.dim(1) != image.dim(1) || mask.dim(2) != image.dim(2))
        throw DimensionError("mask " + shape_str(mask.shape()) + " does not match image " +
                             shape_str(image.shape()));
    check_divisible(image, model.config());

    ForwardResult f = model.forward(image, mask);
    ensure_dir(a.out);
    save_image((fs::path(a.out) / "inner.png").string(), f.inner);
    save_image((fs::path(a.out) / "composite.png").string(), f.composite);
    save_image((fs::path(a.out) / "refined.png").string(), f.refined);

    if (!a.gt.empty()) {
        Tensor gt = load_image(a.gt);
        if (gt.shape() != image.shape())
            throw DimensionError("ground truth " + shape_str(gt.shape()) +
                                 " does not match image " + shape_str(image.shape()));
        const int h = image.dim(1), w = image.dim(2);
        const std::int64_t plane = static_cast<std::int64_t>(h) * w;
        Tensor heat = Tensor::zeros({1, h, w});
        const auto& rv = f.refined.data();
        const auto& gv = gt.data();
        for (std::int64_t p = 0; p < plane; ++p) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c) d += std::abs(rv[c * plane + p] - gv[c * plane + p]);
            heat.data()[p] = d / 3.0;
        }
        save_image((fs::path(a.out) / "diff.png").string(), heat);
    }
    std::cout << "wrote inner.png, composite.png, refined.png"
              << (a.gt.empty() ? "" : ", diff.png") << " to " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string ckpt, data, manifest;
    std::string out = ".";
};

struct EvalRow {
    std::string name;
    RegionMetrics region;
    double psnr_db = 0.0;
    double ssim_val = 0.0;
};

int run_eval(const EvalArgs& a) {
    CRFormerModel model = load_checkpoint(a.ckpt);
    DatasetIndex data = a.manifest.empty() ? index_dataset(a.data, "test")
                                           : index_dataset_manifest(a.data, a.manifest, "test");
    if (data.empty()) throw IoError("no triplets found under '" + a.data + "'");

    std::vector<EvalRow> rows;
    rows.reserve(data.size());
    for (const DatasetEntry& e : data.entries) {
        Triplet t = load_triplet(e);
        check_divisible(t.shadow, model.config());
        ForwardResult f = model.forward(t.shadow, t.mask);
        EvalRow row;
        row.name = e.name;
        row.region = region_mae(f.refined, t.shadow_free, t.mask);
        row.psnr_db = psnr(f.refined, t.shadow_free);
        row.ssim_val = ssim(f.refined, t.shadow_free);
        rows.push_back(std::move(row));
    }

    // Aggregate: unweighted mean over images, skipping region values that
    // are undefined for an image (empty region).
    double s_sum = 0.0, ns_sum = 0.0, all_sum = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
    int s_n = 0, ns_n = 0;
    for (const EvalRow& r : rows) {
        if (r.region.shadow_mae) {
            s_sum += *r.region.shadow_mae;
            ++s_n;
        }
        if (r.region.nonshadow_mae) {
            ns_sum += *r.region.nonshadow_mae;
            ++ns_n;
        }
        all_sum += r.region.all_mae;
        psnr_sum += r.psnr_db;
        ssim_sum += r.ssim_val;
    }
    const double n = static_cast<double>(rows.size());

    std::string report;
    for (const EvalRow& r : rows) {
        report += "image " + r.name + " shadow_mae " + opt_str(r.region.shadow_mae) +
                  " nonshadow_mae " + opt_str(r.region.nonshadow_mae) + " all_mae " +
                  fmt_g17(r.region.all_mae) + " psnr " + fmt_g17(r.psnr_db) + " ssim " +
                  fmt_g17(r.ssim_val) + " shadow_pixels " +
                  std::to_string(r.region.shadow_pixels) + " nonshadow_pixels " +
                  std::to_string(r.region.nonshadow_pixels) + "\n";
    }
    report += "aggregate images " + std::to_string(rows.size()) + " shadow_mae " +
              (s_n ? fmt_g17(s_sum / s_n) : std::string("undefined")) + " nonshadow_mae " +
              (ns_n ? fmt_g17(ns_sum / ns_n) : std::string("undefined")) + " all_mae " +
              fmt_g17(all_sum / n) + " psnr " + fmt_g17(psnr_sum / n) + " ssim " +
              fmt_g17(ssim_sum / n) + "\n";
    ensure_dir(a.out);
    write_text((fs::path(a.out) / "eval.txt").string(), report);

    std::printf("%-12s %10s %10s %10s %10s %8s\n", "image", "S", "NS", "All", "PSNR", "SSIM");
    for (const EvalRow& r : rows) {
        std::printf("%-12s %10s %10s %10.4f %10.4f %8.4f\n", r.name.c_str(),
                    r.region.shadow_mae ? fmt_g17(*r.region.shadow_mae).substr(0, 10).c_str()
                                        : "-",
                    r.region.nonshadow_mae
                        ? fmt_g17(*r.region.nonshadow_mae).substr(0, 10).c_str()
                        : "-",
                    r.region.all_mae, r.psnr_db, r.ssim_val);
    }
    std::printf("%-12s %10.4f %10.4f %10.4f %10.4f %8.4f\n", "aggregate",
                s_n ? s_sum / s_n : 0.0, ns_n ? ns_sum / ns_n : 0.0, all_sum / n,
                psnr_sum / n, ssim_sum / n);
    return 0;
}

struct GradcheckArgs {
    std::uint64_t seed = 7;
    int probes = 4;
    double h = 1e-5;
    double tolerance = 1e-3;
};

int run_gradcheck(const GradcheckArgs& a) {
    ModelConfig mc;
    mc.base_channels = 8;
    mc.num_blocks = 1;
    mc.residual_block_count = 1;
    mc.refine_levels = 2;

    Rng master(a.seed);
    Rng init_rng = master.fork(1);
    CRFormerModel model(mc, init_rng);

    Rng data_rng = master.fork(2);
    const int h = 16, w = 16;
    Tensor image = Tensor::zeros({3, h, w});
    for (double& v : image.data()) v = 0.1 + 0.8 * data_rng.uniform();
    Tensor gt = Tensor::zeros({3, h, w});
    for (double& v : gt.data()) v = 0.1 + 0.8 * data_rng.uniform();

    // Drawn per attention token (4x4 pixel blocks), with both regions pinned
    // present; a pixel-level draw here tends to cover every token with
    // shadow, which would zero the attention path and make its gradient
    // check vacuous.
    const int mult = ModelConfig::downsample_factor;
    const int th = h / mult, tw = w / mult;
    Tensor mask = Tensor::zeros({1, h, w});
    for (int ty = 0; ty < th; ++ty)
        for (int tx = 0; tx < tw; ++tx) {
            double v = data_rng.uniform() < 0.5 ? 1.0 : 0.0;
            if (ty == 0 && tx == 0) v = 1.0;
            if (ty == th - 1 && tx == tw - 1) v = 0.0;
            for (int y = ty * mult; y < (ty + 1) * mult; ++y)
                for (int x = tx * mult; x < (tx + 1) * mult; ++x)
                    mask.data()[static_cast<std::int64_t>(y) * w + x] = v;
        }

    GradCheckReport report = model_gradcheck(model, image, mask, gt, LossWeights{},
                                             SpatialLossConfig{}, a.probes, a.h,
                                             a.tolerance, a.seed);
    for (const GradCheckGroup& g : report.groups)
        std::cout << "group " << g.name << " max_rel_err " << fmt_g17(g.max_rel_err)
                  << " probes " << g.probes << "\n";
    std::cout << "gradcheck worst " << fmt_g17(report.worst) << " tolerance "
              << fmt_g17(a.tolerance) << " " << (report.passed ? "PASS" : "FAIL") << "\n";
    return report.passed ? 0 : 1;
}

struct OracleArgs {
    std::uint64_t seed = 2024;
    int instances = 100;
    int hw = 64;
    int channels = 8;
    double tolerance = 1e-10;
};

int run_attn_oracle(const OracleArgs& a) {
    if (a.hw > 1024) throw ConfigError("attn-oracle token budget must stay <= 1024");
    OracleReport report =
        run_attention_oracle_sweep(a.seed, a.instances, a.hw, a.channels, a.tolerance);
    std::cout << "attn-oracle instances " << report.instances << " max_abs_diff "
              << fmt_g17(report.max_abs_diff) << " tolerance " << fmt_g17(a.tolerance) << " "
              << (report.passed ? "PASS" : "FAIL") << "\n";
    return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CRFormer shadow removal toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic shadow dataset");
    c_synth->add_option("--out", synth.out, "output dataset root")->required();
    c_synth->add_option("--seed", synth.spec.seed, "generator seed");
    c_synth->add_option("--count", synth.spec.count, "number of triplets");
    c_synth->add_option("--height", synth.spec.height, "image height");
    c_synth->add_option("--width", synth.spec.width, "image width");
    c_synth->add_option("--attenuation-lo", synth.spec.attenuation_lo, "darkening lower bound");
    c_synth->add_option("--attenuation-hi", synth.spec.attenuation_hi, "darkening upper bound");
    c_synth->add_option("--area-lo", synth.spec.area_lo, "polygon area lower bound");
    c_synth->add_option("--area-hi", synth.spec.area_hi, "polygon area upper bound");

    TrainArgs train;
    std::uint64_t train_seed = 0;
    int train_epochs = 0;
    CLI::App* c_train = app.add_subcommand("train", "train a model on a dataset");
    c_train->add_option("--data", train.data, "dataset root")->required();
    c_train->add_option("--out", train.out, "output directory");
    c_train->add_option("--config", train.config_path, "run config JSON");
    c_train->add_option("--profile", train.profile, "desk or paper");
    CLI::Option* o_tseed = c_train->add_option("--seed", train_seed, "override config seed");
    CLI::Option* o_tepochs = c_train->add_option("--epochs", train_epochs, "override epochs");

    InferArgs infer;
    CLI::App* c_infer = app.add_subcommand("infer", "run a checkpoint on one image");
    c_infer->add_option("--ckpt", infer.ckpt, "checkpoint path")->required();
    c_infer->add_option("--image", infer.image, "shadow image PNG")->required();
    c_infer->add_option("--mask", infer.mask, "shadow mask PNG")->required();
    c_infer->add_option("--gt", infer.gt, "optional ground truth for a difference map");
    c_infer->add_option("--out", infer.out, "output directory");

    EvalArgs eval;
    CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    c_eval->add_option("--ckpt", eval.ckpt, "checkpoint path")->required();
    c_eval->add_option("--data", eval.data, "dataset root")->required();
    c_eval->add_option("--manifest", eval.manifest, "optional triplet manifest");
    c_eval->add_option("--out", eval.out, "output directory");

    GradcheckArgs grad;
    CLI::App* c_grad = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    c_grad->add_option("--seed", grad.seed, "seed");
    c_grad->add_option("--probes", grad.probes, "probes per parameter group");
    c_grad->add_option("--step", grad.h, "finite difference step");
    c_grad->add_option("--tolerance", grad.tolerance, "max relative error");

    OracleArgs oracle;
    CLI::App* c_oracle = app.add_subcommand("attn-oracle", "attention brute-force equivalence");
    c_oracle->add_option("--seed", oracle.seed, "seed");
    c_oracle->add_option("--instances", oracle.instances, "random instances");
    c_oracle->add_option("--hw", oracle.hw, "max token count (<= 1024)");
    c_oracle->add_option("--channels", oracle.channels, "max channel count");
    c_oracle->add_option("--tolerance", oracle.tolerance, "max abs diff");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*c_synth) return run_synth(synth);
        if (*c_train) {
            if (*o_tseed) train.seed = train_seed;
            if (*o_tepochs) train.epochs = train_epochs;
            return run_train(train);
        }
        if (*c_infer) return run_infer(infer);
        if (*c_eval) return run_eval(eval);
        if (*c_grad) return run_gradcheck(grad);
        if (*c_oracle) return run_attn_oracle(oracle);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
