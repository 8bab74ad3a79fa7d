#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crformer/attention.hpp"

namespace crformer {

// Plain-loop reference for region cross attention, written without the graph
// engine: explicit projections, per-query softmax over the allowed key set,
// weighted sum. Fully masked queries produce zero rows. Inputs are row-major
// [t,c] matrices; weights are [c,c].
std::vector<double> region_attention_oracle(const std::vector<double>& fq,
                                            const std::vector<double>& fkv,
                                            const std::vector<std::uint8_t>& ms,
                                            const std::vector<double>& wq,
                                            const std::vector<double>& wk,
                                            const std::vector<double>& wv, int t, int c,
                                            KeyRegion keys = KeyRegion::nonshadow);

struct OracleReport {
    int instances = 0;
    double max_abs_diff = 0.0;
    bool passed = false;
};

// Randomized equivalence sweep between the graph implementation and the
// reference, covering degenerate all-shadow/all-clear masks.
OracleReport run_attention_oracle_sweep(std::uint64_t seed, int instances, int max_tokens,
                                        int max_channels, double tolerance);

}  // namespace crformer
