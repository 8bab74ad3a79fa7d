#include "crformer/config.hpp"

#include <json.hpp>

#include <cmath>

#include "crformer/errors.hpp"

namespace crformer {

void RunConfig::validate() const {
    model.validate();
    if (loss.w1 < 0.0 || loss.w2 < 0.0)
        throw ConfigError("loss weights must be nonnegative");
    if (spatial.pool_size <= 0) throw ConfigError("spatial pool size must be positive");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("betas must lie in [0, 1)");
    if (lr_halve_every <= 0) throw ConfigError("lr_halve_every must be positive");
    if (epochs < 0) throw ConfigError("epochs must not be negative");
    if (batch_size != 1) throw ConfigError("only batch size 1 is supported");
    if (crop <= 0 || crop % model.spatial_multiple() != 0)
        throw ConfigError("crop " + std::to_string(crop) + " must be a positive multiple of " +
                          std::to_string(model.spatial_multiple()));
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["model"] = nlohmann::json::parse(model.to_json());
    j["loss"]["w1"] = loss.w1;
    j["loss"]["w2"] = loss.w2;
    j["loss"]["pool_size"] = spatial.pool_size;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["lr_halve_every"] = lr_halve_every;
    j["epochs"] = epochs;
    j["crop"] = crop;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
    return from_json_over(text, RunConfig{});
}

RunConfig RunConfig::from_json_over(const std::string& text, const RunConfig& base) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad run config: ") + e.what());
    }
    const RunConfig& d = base;
    RunConfig c = base;
    try {
        if (j.contains("model")) c.model = ModelConfig::from_json(j["model"].dump());
        if (j.contains("loss")) {
            const auto& l = j["loss"];
            c.loss.w1 = l.value("w1", d.loss.w1);
            c.loss.w2 = l.value("w2", d.loss.w2);
            c.spatial.pool_size = l.value("pool_size", d.spatial.pool_size);
        }
        c.lr = j.value("lr", d.lr);
        c.beta1 = j.value("beta1", d.beta1);
        c.beta2 = j.value("beta2", d.beta2);
        c.lr_halve_every = j.value("lr_halve_every", d.lr_halve_every);
        c.epochs = j.value("epochs", d.epochs);
        c.crop = j.value("crop", d.crop);
        c.batch_size = j.value("batch_size", d.batch_size);
        c.seed = j.value("seed", d.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad run config field: ") + e.what());
    }
    c.validate();
    return c;
}

double lr_at_epoch(const RunConfig& cfg, int epoch) {
    if (epoch < 0) throw ConfigError("epoch must not be negative");
    const int halvings = epoch / cfg.lr_halve_every;
    return cfg.lr * std::pow(0.5, halvings);
}

RunConfig desk_profile() {
    RunConfig c;
    c.crop = 64;
    return c;
}

RunConfig paper_profile() {
    RunConfig c;
    c.crop = 400;
    return c;
}

RunConfig profile_by_name(const std::string& name) {
    if (name == "desk") return desk_profile();
    if (name == "paper") return paper_profile();
    throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

}  // namespace crformer
