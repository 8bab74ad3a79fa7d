#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace crformer {

// Deterministic random source. Only raw mt19937_64 draws are used and every
// mapping to a distribution is spelled out here, so two runs with the same
// seed produce bit-identical streams on any conforming standard library
// (std::*_distribution would not guarantee that).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] via rejection-free modulo of a 64-bit draw;
    // the bias is < 2^-32 for the small ranges used here.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(eng_() % span);
    }

    // Standard normal via Box-Muller, one value per pair of uniforms.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derive an independent stream for a sub-task without disturbing this one.
    Rng fork(std::uint64_t salt) const {
        std::mt19937_64 probe = eng_;
        return Rng(probe() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace crformer
