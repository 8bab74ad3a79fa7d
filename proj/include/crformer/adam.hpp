#pragma once

#include <cstdint>
#include <vector>

#include "crformer/tensor.hpp"

namespace crformer {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.99;
    double eps = 1e-8;
};

// Adam with bias correction over a fixed list of leaf parameters.
class Adam {
   public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    // Applies one update from the gradients currently stored on the
    // parameters. A parameter whose gradient was never touched counts as
    // zero gradient.
    void step();
    void zero_grad();

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    std::int64_t steps_taken() const { return t_; }

   private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

}  // namespace crformer
