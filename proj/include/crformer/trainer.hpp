#pragma once

#include <cstdint>
#include <ostream>
#include <string>

#include "crformer/adam.hpp"
#include "crformer/config.hpp"
#include "crformer/dataset.hpp"
#include "crformer/model.hpp"
#include "crformer/rng.hpp"

namespace crformer {

// snprintf %.17g: shortest text that reproduces the double exactly, used
// for every number that lands in logs or reports.
std::string fmt_g17(double v);

struct StepLosses {
    double rec = 0.0;
    double spa = 0.0;
    double total = 0.0;
};

// Random crop + random horizontal flip, the same draw applied to all three
// planes. Images smaller than the crop are first upscaled (nearest) to fit;
// masks stay exactly binary under both transforms.
Triplet augment(const Triplet& t, int crop_size, Rng& rng);

class Trainer {
   public:
    Trainer(CRFormerModel& model, const RunConfig& cfg);

    // One optimization step on an already-sized sample. Throws
    // TrainingDiverged (before touching the weights) if the loss is not
    // finite.
    StepLosses train_step(const Tensor& shadow, const Tensor& mask, const Tensor& gt);

    // The full recipe: per-epoch lr schedule, shuffle, augment, one line of
    // loss log per step plus a "# epoch" marker line per epoch.
    void run(const DatasetIndex& data, std::ostream& log);

    Adam& optimizer() { return opt_; }
    std::int64_t steps() const { return step_count_; }

   private:
    CRFormerModel& model_;
    RunConfig cfg_;
    Adam opt_;
    Rng rng_;
    std::int64_t step_count_ = 0;
};

}  // namespace crformer
