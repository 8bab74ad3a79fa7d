#include "crformer/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "crformer/errors.hpp"
#include "crformer/image.hpp"
#include "crformer/losses.hpp"

namespace crformer {

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Triplet augment(const Triplet& t, int crop_size, Rng& rng) {
    Triplet s = t;
    int h = s.shadow.dim(1), w = s.shadow.dim(2);
    if (h < crop_size || w < crop_size) {
        const int nh = h < crop_size ? crop_size : h;
        const int nw = w < crop_size ? crop_size : w;
        s.shadow = resize_nearest(s.shadow, nh, nw);
        s.shadow_free = resize_nearest(s.shadow_free, nh, nw);
        s.mask = resize_nearest(s.mask, nh, nw);
        h = nh;
        w = nw;
    }
    const int top = static_cast<int>(rng.uniform_int(0, h - crop_size));
    const int left = static_cast<int>(rng.uniform_int(0, w - crop_size));
    s.shadow = crop(s.shadow, top, left, crop_size, crop_size);
    s.shadow_free = crop(s.shadow_free, top, left, crop_size, crop_size);
    s.mask = crop(s.mask, top, left, crop_size, crop_size);
    if (rng.uniform() < 0.5) {
        s.shadow = hflip(s.shadow);
        s.shadow_free = hflip(s.shadow_free);
        s.mask = hflip(s.mask);
    }
    return s;
}

Trainer::Trainer(CRFormerModel& model, const RunConfig& cfg)
    : model_(model),
      cfg_(cfg),
      opt_(model.params(), AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8}),
      rng_(cfg.seed) {
    cfg_.validate();
}

StepLosses Trainer::train_step(const Tensor& shadow, const Tensor& mask, const Tensor& gt) {
    model_.zero_grad();
    const ForwardResult f = model_.forward(shadow, mask);
    const Tensor rec = reconstruction_loss(f.inner, f.refined, gt);
    const Tensor spa = spatial_consistency_loss(f.inner, f.refined, gt, cfg_.spatial);
    const Tensor total = add(scale(rec, cfg_.loss.w1), scale(spa, cfg_.loss.w2));
    StepLosses out{rec.item(), spa.item(), total.item()};
    if (!std::isfinite(out.total))
        throw TrainingDiverged("non-finite loss: rec " + fmt_g17(out.rec) + " spa " +
                               fmt_g17(out.spa) + " total " + fmt_g17(out.total));
    total.backward();
    opt_.step();
    ++step_count_;
    return out;
}

void Trainer::run(const DatasetIndex& data, std::ostream& log) {
    if (data.empty()) throw ConfigError("training dataset is empty");

    // Desk-scale sets fit in memory; bigger sets are re-decoded per use.
    const bool preload = data.size() <= 64;
    std::vector<Triplet> cache;
    if (preload) {
        cache.reserve(data.size());
        for (const DatasetEntry& e : data.entries) cache.push_back(load_triplet(e));
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg_, epoch);
        opt_.set_lr(lr);
        log << "# epoch " << epoch << " lr " << fmt_g17(lr) << "\n";
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j =
                static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t idx : order) {
            Triplet loaded;
            const Triplet& t = preload ? cache[idx]
                                       : (loaded = load_triplet(data.entries[idx]), loaded);
            Triplet sample = augment(t, cfg_.crop, rng_);
            StepLosses s;
            try {
                s = train_step(sample.shadow, sample.mask, sample.shadow_free);
            } catch (const TrainingDiverged& e) {
                throw TrainingDiverged("step " + std::to_string(step_count_ + 1) + " epoch " +
                                       std::to_string(epoch) + " sample '" +
                                       data.entries[idx].name + "' lr " + fmt_g17(lr) + ": " +
                                       e.what());
            }
            log << "step " << step_count_ << " rec " << fmt_g17(s.rec) << " spa "
                << fmt_g17(s.spa) << " total " << fmt_g17(s.total) << "\n";
        }
    }
    log.flush();
}

}  // namespace crformer
