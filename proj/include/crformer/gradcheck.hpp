#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crformer/losses.hpp"
#include "crformer/model.hpp"

namespace crformer {

struct GradCheckGroup {
    std::string name;
    double max_rel_err = 0.0;
    int probes = 0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double worst = 0.0;
    bool passed = false;
};

// Compares backward() gradients of the full training loss against central
// differences, probing a few coordinates per parameter group. Relative error
// uses max(|a|,|b|,1) in the denominator.
GradCheckReport model_gradcheck(CRFormerModel& model, const Tensor& image, const Tensor& mask,
                                const Tensor& gt, const LossWeights& weights,
                                const SpatialLossConfig& spa, int probes_per_group, double h,
                                double tolerance, std::uint64_t seed);

}  // namespace crformer
