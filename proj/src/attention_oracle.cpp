#include "crformer/attention_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "crformer/errors.hpp"
#include "crformer/rng.hpp"
#include "crformer/tensor.hpp"

namespace crformer {

namespace {

// out[t,c] = in[t,c] * w[c,c], all naive loops
std::vector<double> project(const std::vector<double>& in, const std::vector<double>& w, int t,
                            int c) {
    std::vector<double> out(static_cast<size_t>(t) * c, 0.0);
    for (int i = 0; i < t; ++i) {
        for (int j = 0; j < c; ++j) {
            double acc = 0.0;
            for (int l = 0; l < c; ++l) acc += in[static_cast<size_t>(i) * c + l] * w[static_cast<size_t>(l) * c + j];
            out[static_cast<size_t>(i) * c + j] = acc;
        }
    }
    return out;
}

}  // namespace

std::vector<double> region_attention_oracle(const std::vector<double>& fq,
                                            const std::vector<double>& fkv,
                                            const std::vector<std::uint8_t>& ms,
                                            const std::vector<double>& wq,
                                            const std::vector<double>& wk,
                                            const std::vector<double>& wv, int t, int c,
                                            KeyRegion keys) {
    if (static_cast<size_t>(t) != ms.size()) throw ContractError("oracle: mask length mismatch");
    const std::vector<double> q = project(fq, wq, t, c);
    const std::vector<double> k = project(fkv, wk, t, c);
    const std::vector<double> v = project(fkv, wv, t, c);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(c));

    std::vector<double> out(static_cast<size_t>(t) * c, 0.0);
    std::vector<int> allowed;
    allowed.reserve(ms.size());
    for (int j = 0; j < t; ++j) {
        const bool ok = keys == KeyRegion::all || (keys == KeyRegion::nonshadow ? ms[j] == 0 : ms[j] == 1);
        if (ok) allowed.push_back(j);
    }
    if (allowed.empty()) return out;

    std::vector<double> scores(allowed.size());
    for (int i = 0; i < t; ++i) {
        if (ms[i] != 1) continue;  // only shadow tokens query
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t a = 0; a < allowed.size(); ++a) {
            double dot = 0.0;
            for (int l = 0; l < c; ++l) {
                dot += q[static_cast<size_t>(i) * c + l] * k[static_cast<size_t>(allowed[a]) * c + l];
            }
            scores[a] = dot * inv_sqrt_d;
            if (scores[a] > mx) mx = scores[a];
        }
        double total = 0.0;
        for (double& s : scores) {
            s = std::exp(s - mx);
            total += s;
        }
        for (size_t a = 0; a < allowed.size(); ++a) {
            const double w = scores[a] / total;
            const double* vrow = &v[static_cast<size_t>(allowed[a]) * c];
            double* orow = &out[static_cast<size_t>(i) * c];
            for (int l = 0; l < c; ++l) orow[l] += w * vrow[l];
        }
    }
    return out;
}

OracleReport run_attention_oracle_sweep(std::uint64_t seed, int instances, int max_tokens,
                                        int max_channels, double tolerance) {
    Rng rng(seed);
    OracleReport report;
    report.instances = instances;
    for (int it = 0; it < instances; ++it) {
        const int t = rng.uniform_int(1, max_tokens);
        const int c = rng.uniform_int(1, max_channels);

        std::vector<std::uint8_t> ms(static_cast<size_t>(t));
        const int mask_kind = it % 8;
        if (mask_kind == 6) {
            std::fill(ms.begin(), ms.end(), std::uint8_t{1});  // all shadow
        } else if (mask_kind == 7) {
            std::fill(ms.begin(), ms.end(), std::uint8_t{0});  // all clear
        } else {
            const double p = rng.uniform(0.1, 0.9);
            for (auto& m : ms) m = rng.uniform() < p ? 1 : 0;
        }

        auto rand_vec = [&rng](size_t n, double s) {
            std::vector<double> v(n);
            for (double& x : v) x = rng.normal(0.0, s);
            return v;
        };
        const size_t tc = static_cast<size_t>(t) * c;
        const size_t cc = static_cast<size_t>(c) * c;
        std::vector<double> fq = rand_vec(tc, 1.0);
        std::vector<double> fkv = rand_vec(tc, 1.0);
        std::vector<double> wq = rand_vec(cc, 0.5);
        std::vector<double> wk = rand_vec(cc, 0.5);
        std::vector<double> wv = rand_vec(cc, 0.5);

        Rng dummy(0);
        AlignmentBlockParams params = AlignmentBlockParams::init(c, 1, dummy);
        params.wq = Tensor::from_data({c, c}, wq);
        params.wk = Tensor::from_data({c, c}, wk);
        params.wv = Tensor::from_data({c, c}, wv);

        Tensor got = region_cross_attention(Tensor::from_data({t, c}, fq),
                                            Tensor::from_data({t, c}, fkv), ms, params);
        const std::vector<double> want = region_attention_oracle(fq, fkv, ms, wq, wk, wv, t, c);
        for (size_t i = 0; i < want.size(); ++i) {
            report.max_abs_diff = std::max(report.max_abs_diff, std::fabs(got.data()[i] - want[i]));
        }
    }
    report.passed = report.max_abs_diff <= tolerance;
    return report;
}

}  // namespace crformer
