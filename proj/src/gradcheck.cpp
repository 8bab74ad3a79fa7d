#include "crformer/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "crformer/rng.hpp"

namespace crformer {

namespace {

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1.0});
}

std::vector<size_t> pick_coords(size_t n, int want, Rng& rng) {
    std::vector<size_t> out;
    if (static_cast<size_t>(want) >= n) {
        out.resize(n);
        for (size_t i = 0; i < n; ++i) out[i] = i;
        return out;
    }
    std::unordered_set<size_t> seen;
    while (seen.size() < static_cast<size_t>(want)) {
        seen.insert(static_cast<size_t>(rng.uniform_int(0, static_cast<int>(n) - 1)));
    }
    out.assign(seen.begin(), seen.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

GradCheckReport model_gradcheck(CRFormerModel& model, const Tensor& image, const Tensor& mask,
                                const Tensor& gt, const LossWeights& weights,
                                const SpatialLossConfig& spa, int probes_per_group, double h,
                                double tolerance, std::uint64_t seed) {
    auto loss_value = [&]() {
        ForwardResult out = model.forward(image, mask);
        return total_loss(out.inner, out.refined, gt, weights, spa);
    };

    model.zero_grad();
    loss_value().backward();
    auto named = model.named_params();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(named.size());
    for (auto& [name, p] : named) {
        analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.data().size(), 0.0));
    }

    // Finite differences need forward passes only; drop the graph while
    // probing to keep them cheap.
    for (auto& [name, p] : named) p.set_requires_grad(false);

    Rng rng(seed);
    GradCheckReport report;
    for (size_t gi = 0; gi < named.size(); ++gi) {
        auto& [name, p] = named[gi];
        GradCheckGroup group;
        group.name = name;
        for (size_t coord : pick_coords(p.data().size(), probes_per_group, rng)) {
            const double keep = p.data()[coord];
            p.data()[coord] = keep + h;
            const double fp = loss_value().item();
            p.data()[coord] = keep - h;
            const double fm = loss_value().item();
            p.data()[coord] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            group.max_rel_err = std::max(group.max_rel_err, rel_err(analytic[gi][coord], fd));
            ++group.probes;
        }
        report.worst = std::max(report.worst, group.max_rel_err);
        report.groups.push_back(std::move(group));
    }

    for (auto& [name, p] : named) p.set_requires_grad(true);
    report.passed = report.worst < tolerance;
    return report;
}

}  // namespace crformer
