#pragma once

#include <cstdint>
#include <string>

#include "crformer/losses.hpp"
#include "crformer/model.hpp"

namespace crformer {

// Everything a training run needs, JSON round-trippable. The two named
// profiles share the optimizer recipe and differ in scale: "paper" trains
// on 400x400 crops for the full schedule, "desk" on 64x64 crops sized for
// a single CPU core.
struct RunConfig {
    ModelConfig model;
    LossWeights loss;
    SpatialLossConfig spatial;

    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.99;
    int lr_halve_every = 50;  // epochs between halvings
    int epochs = 200;
    int crop = 400;
    int batch_size = 1;
    std::uint64_t seed = 0;

    // epochs == 0 is allowed: the loop is a no-op and the checkpoint equals
    // the initialization.
    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    // Fields present in the JSON override the base; everything else keeps
    // the base value. Lets a config file patch a named profile.
    static RunConfig from_json_over(const std::string& text, const RunConfig& base);
};

// Step schedule: lr halves every lr_halve_every epochs.
double lr_at_epoch(const RunConfig& cfg, int epoch);

RunConfig desk_profile();
RunConfig paper_profile();

// "desk" or "paper"; anything else is a ConfigError.
RunConfig profile_by_name(const std::string& name);

}  // namespace crformer
