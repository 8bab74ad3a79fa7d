#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crformer/image.hpp"
#include "crformer/tensor.hpp"

using namespace crformer;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("crformer_cli_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& rel) const { return (path / rel).string(); }
};

// Runs the installed binary, captures exit status and stdout.
struct RunResult {
    int status = -1;
    std::string out;
};

RunResult cli(const std::string& args, const std::string& capture_to) {
    const std::string cmd =
        std::string(CRFORMER_CLI_PATH) + " " + args + " > " + capture_to + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    RunResult r;
    r.status = WEXITSTATUS(rc);
    std::ifstream in(capture_to, std::ios::binary);
    r.out.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return r;
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
}

std::string tiny_train_config() {
    return "{\"model\":{\"base_channels\":8,\"num_blocks\":1,\"residual_block_count\":1,"
           "\"refine_levels\":2},\"crop\":32,\"epochs\":2,\"seed\":19}";
}

// Shared fixture: synth a dataset and train a small checkpoint once.
const TempDir& workspace() {
    static TempDir dir("workspace");
    static bool ready = [&] {
        RunResult s = cli("synth --out " + dir.sub("data") + " --seed 5 --count 2 --height 32 --width 32",
                          dir.sub("synth.out"));
        REQUIRE(s.status == 0);
        std::ofstream(dir.sub("cfg.json")) << tiny_train_config();
        RunResult t = cli("train --data " + dir.sub("data") + " --out " + dir.sub("run") +
                              " --config " + dir.sub("cfg.json"),
                          dir.sub("train.out"));
        REQUIRE(t.status == 0);
        return true;
    }();
    (void)ready;
    return dir;
}

}  // namespace

TEST_CASE("synth is deterministic through the command line") {
    TempDir dir("synth_det");
    RunResult a = cli("synth --out " + dir.sub("a") + " --seed 33 --count 2 --height 24 --width 24",
                      dir.sub("a.out"));
    RunResult b = cli("synth --out " + dir.sub("b") + " --seed 33 --count 2 --height 24 --width 24",
                      dir.sub("b.out"));
    CHECK(a.status == 0);
    CHECK(b.status == 0);
    CHECK(slurp(dir.sub("a/shadow/001.png")) == slurp(dir.sub("b/shadow/001.png")));
    RunResult c = cli("synth --out " + dir.sub("c") + " --seed 34 --count 2 --height 24 --width 24",
                      dir.sub("c.out"));
    CHECK(c.status == 0);
    CHECK(slurp(dir.sub("a/shadow/001.png")) != slurp(dir.sub("c/shadow/001.png")));
}

TEST_CASE("synth rejects a bad attenuation range") {
    TempDir dir("synth_bad");
    RunResult r = cli("synth --out " + dir.sub("x") + " --attenuation-lo 0 --attenuation-hi 0.5",
                      dir.sub("r.out"));
    CHECK(r.status != 0);
}

TEST_CASE("train writes checkpoint, loss log and config") {
    const TempDir& dir = workspace();
    CHECK(fs::is_regular_file(dir.sub("run/checkpoint.ckpt")));
    CHECK(fs::is_regular_file(dir.sub("run/config.json")));
    std::string log(slurp(dir.sub("run/loss.log")).data(), slurp(dir.sub("run/loss.log")).size());
    // 2 images x 2 epochs.
    CHECK(log.find("# epoch 0 lr 0.0002") != std::string::npos);
    CHECK(log.find("step 4 ") != std::string::npos);
    CHECK(log.find("step 5 ") == std::string::npos);
}

TEST_CASE("train is bit-reproducible for a fixed seed") {
    const TempDir& dir = workspace();
    TempDir mine("train_det");
    RunResult t = cli("train --data " + dir.sub("data") + " --out " + mine.sub("run2") +
                          " --config " + dir.sub("cfg.json"),
                      mine.sub("t.out"));
    CHECK(t.status == 0);
    CHECK(slurp(mine.sub("run2/loss.log")) == slurp(dir.sub("run/loss.log")));
    CHECK(slurp(mine.sub("run2/checkpoint.ckpt")) == slurp(dir.sub("run/checkpoint.ckpt")));
}

TEST_CASE("a different seed changes the run") {
    const TempDir& dir = workspace();
    TempDir mine("train_seed");
    RunResult t = cli("train --data " + dir.sub("data") + " --out " + mine.sub("run3") +
                          " --config " + dir.sub("cfg.json") + " --seed 77",
                      mine.sub("t.out"));
    CHECK(t.status == 0);
    CHECK(slurp(mine.sub("run3/loss.log")) != slurp(dir.sub("run/loss.log")));
}

TEST_CASE("train fails loudly on a missing dataset") {
    TempDir dir("train_nodata");
    RunResult t = cli("train --data " + dir.sub("absent") + " --out " + dir.sub("out"),
                      dir.sub("t.out"));
    CHECK(t.status != 0);
}

TEST_CASE("infer writes all three stages plus a difference map") {
    const TempDir& dir = workspace();
    TempDir mine("infer_stages");
    RunResult r = cli("infer --ckpt " + dir.sub("run/checkpoint.ckpt") + " --image " +
                          dir.sub("data/shadow/000.png") + " --mask " +
                          dir.sub("data/mask/000.png") + " --gt " +
                          dir.sub("data/shadow_free/000.png") + " --out " + mine.sub("out"),
                      mine.sub("r.out"));
    CHECK(r.status == 0);
    for (const char* f : {"inner.png", "composite.png", "refined.png", "diff.png"}) {
        CAPTURE(f);
        CHECK(fs::is_regular_file(mine.sub(std::string("out/") + f)));
    }
    Tensor inner = load_image(mine.sub("out/inner.png"));
    CHECK(inner.shape() == Shape{3, 32, 32});
}

TEST_CASE("infer with an all-zero mask reproduces the input in the composite") {
    const TempDir& dir = workspace();
    TempDir mine("infer_zeromask");
    save_image(mine.sub("zero.png"), Tensor::zeros({1, 32, 32}));
    RunResult r = cli("infer --ckpt " + dir.sub("run/checkpoint.ckpt") + " --image " +
                          dir.sub("data/shadow/000.png") + " --mask " + mine.sub("zero.png") +
                          " --out " + mine.sub("out"),
                      mine.sub("r.out"));
    CHECK(r.status == 0);
    Tensor in_img = load_image(dir.sub("data/shadow/000.png"));
    Tensor composite = load_image(mine.sub("out/composite.png"));
    CHECK(composite.data() == in_img.data());
}

TEST_CASE("infer twice produces identical files") {
    const TempDir& dir = workspace();
    TempDir mine("infer_det");
    const std::string base = "infer --ckpt " + dir.sub("run/checkpoint.ckpt") + " --image " +
                             dir.sub("data/shadow/001.png") + " --mask " +
                             dir.sub("data/mask/001.png");
    RunResult a = cli(base + " --out " + mine.sub("a"), mine.sub("a.out"));
    RunResult b = cli(base + " --out " + mine.sub("b"), mine.sub("b.out"));
    CHECK(a.status == 0);
    CHECK(b.status == 0);
    for (const char* f : {"inner.png", "composite.png", "refined.png"}) {
        CAPTURE(f);
        CHECK(slurp(mine.sub(std::string("a/") + f)) == slurp(mine.sub(std::string("b/") + f)));
    }
}

TEST_CASE("infer rejects a garbage checkpoint") {
    const TempDir& dir = workspace();
    TempDir mine("infer_badckpt");
    std::ofstream(mine.sub("bad.ckpt"), std::ios::binary) << "not a checkpoint";
    RunResult r = cli("infer --ckpt " + mine.sub("bad.ckpt") + " --image " +
                          dir.sub("data/shadow/000.png") + " --mask " +
                          dir.sub("data/mask/000.png") + " --out " + mine.sub("out"),
                      mine.sub("r.out"));
    CHECK(r.status != 0);
}

TEST_CASE("infer rejects indivisible input sizes") {
    const TempDir& dir = workspace();
    TempDir mine("infer_dims");
    save_image(mine.sub("img.png"), Tensor::full({3, 30, 30}, 0.5));
    save_image(mine.sub("mask.png"), Tensor::zeros({1, 30, 30}));
    RunResult r = cli("infer --ckpt " + dir.sub("run/checkpoint.ckpt") + " --image " +
                          mine.sub("img.png") + " --mask " + mine.sub("mask.png") + " --out " +
                          mine.sub("out"),
                      mine.sub("r.out"));
    CHECK(r.status != 0);
}

TEST_CASE("eval emits per-image rows and a consistent aggregate") {
    const TempDir& dir = workspace();
    TempDir mine("eval_rows");
    RunResult r = cli("eval --ckpt " + dir.sub("run/checkpoint.ckpt") + " --data " +
                          dir.sub("data") + " --out " + mine.sub("out"),
                      mine.sub("r.out"));
    CHECK(r.status == 0);
    std::ifstream report(mine.sub("out/eval.txt"));
    REQUIRE(report.good());
    std::string line;
    double s_sum = 0.0, all_sum = 0.0, psnr_sum = 0.0;
    int images = 0;
    bool saw_aggregate = false;
    while (std::getline(report, line)) {
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "image") {
            std::string name, k;
            double shadow, nonshadow, all, psnr_v, ssim_v;
            ss >> name >> k >> shadow >> k >> nonshadow >> k >> all >> k >> psnr_v >> k >> ssim_v;
            REQUIRE(ss.good());
            ++images;
            s_sum += shadow;
            all_sum += all;
            psnr_sum += psnr_v;
            CHECK(ssim_v <= 1.0);
        } else if (kind == "aggregate") {
            std::string k;
            int n;
            double shadow, nonshadow, all, psnr_v, ssim_v;
            ss >> k >> n >> k >> shadow >> k >> nonshadow >> k >> all >> k >> psnr_v >> k >> ssim_v;
            CHECK(n == images);
            CHECK(shadow == doctest::Approx(s_sum / images).epsilon(1e-12));
            CHECK(all == doctest::Approx(all_sum / images).epsilon(1e-12));
            CHECK(psnr_v == doctest::Approx(psnr_sum / images).epsilon(1e-12));
            saw_aggregate = true;
        }
    }
    CHECK(images == 2);
    CHECK(saw_aggregate);
}

TEST_CASE("eval via manifest matches eval via layout") {
    const TempDir& dir = workspace();
    TempDir mine("eval_manifest");
    {
        std::ofstream mf(mine.sub("list.txt"));
        mf << "# triplets\n";
        for (const char* n : {"000", "001"})
            mf << "shadow/" << n << ".png shadow_free/" << n << ".png mask/" << n << ".png\n";
    }
    RunResult a = cli("eval --ckpt " + dir.sub("run/checkpoint.ckpt") + " --data " +
                          dir.sub("data") + " --out " + mine.sub("a"),
                      mine.sub("a.out"));
    RunResult b = cli("eval --ckpt " + dir.sub("run/checkpoint.ckpt") + " --data " +
                          dir.sub("data") + " --manifest " + mine.sub("list.txt") + " --out " +
                          mine.sub("b"),
                      mine.sub("b.out"));
    CHECK(a.status == 0);
    CHECK(b.status == 0);
    CHECK(slurp(mine.sub("a/eval.txt")) == slurp(mine.sub("b/eval.txt")));
}

TEST_CASE("eval refuses an empty dataset") {
    const TempDir& dir = workspace();
    TempDir mine("eval_empty");
    for (const char* sub : {"shadow", "shadow_free", "mask"})
        fs::create_directories(mine.path / "empty" / sub);
    RunResult r = cli("eval --ckpt " + dir.sub("run/checkpoint.ckpt") + " --data " +
                          mine.sub("empty") + " --out " + mine.sub("out"),
                      mine.sub("r.out"));
    CHECK(r.status != 0);
}

TEST_CASE("gradcheck passes by default and is seed-deterministic") {
    TempDir dir("gradcheck");
    RunResult a = cli("gradcheck --seed 977 --probes 2", dir.sub("a.out"));
    CHECK(a.status == 0);
    CHECK(a.out.find("PASS") != std::string::npos);
    RunResult b = cli("gradcheck --seed 977 --probes 2", dir.sub("b.out"));
    CHECK(a.out == b.out);
}

TEST_CASE("gradcheck with zero tolerance fails") {
    TempDir dir("gradcheck_zero");
    RunResult r = cli("gradcheck --seed 977 --probes 1 --tolerance 0", dir.sub("r.out"));
    CHECK(r.status != 0);
    CHECK(r.out.find("FAIL") != std::string::npos);
}

TEST_CASE("attn-oracle passes and bounds its budget") {
    TempDir dir("oracle");
    RunResult r = cli("attn-oracle --seed 11 --instances 12 --hw 16 --channels 4",
                      dir.sub("r.out"));
    CHECK(r.status == 0);
    CHECK(r.out.find("PASS") != std::string::npos);
    RunResult big = cli("attn-oracle --hw 2048", dir.sub("big.out"));
    CHECK(big.status != 0);
}

TEST_CASE("unknown subcommands and missing flags are parse errors") {
    TempDir dir("parse");
    CHECK(cli("defrag", dir.sub("a.out")).status != 0);
    CHECK(cli("synth", dir.sub("b.out")).status != 0);  // --out is required
    CHECK(cli("train --profile gpu --data x", dir.sub("c.out")).status != 0);
}
