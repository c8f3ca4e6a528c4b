#pragma once

// Seeded random instance generator shared by the kernel property tests and
// the acceptance suite.

#include "condebate/attn_kernel.hpp"
#include "condebate/rng.hpp"
#include "condebate/tensor.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace corpus {

struct KernelInstance {
    condebate::Tensor4 a;
    std::vector<condebate::RangeWeight> ranges;
    condebate::RangeScalingConfig cfg;
};

// Random (tensor, ranges) pair: q_len = 1 (most draws) or a small prefill-like
// q_len that exercises the guard; up to max_ranges disjoint sorted spans;
// rows either softmax-normalized or raw-signed.
inline KernelInstance make_instance(condebate::Pcg32 & rng, int max_k = 64, int max_ranges = 4,
                                    bool vary_lambda = false) {
    KernelInstance inst;
    const int batch = 1 + static_cast<int>(rng.next_below(2));
    const int heads = 1 + static_cast<int>(rng.next_below(2));
    const int q_len = rng.next_below(8) == 0 ? 2 + static_cast<int>(rng.next_below(3)) : 1;
    const int k_len = 4 + static_cast<int>(rng.next_below(static_cast<uint32_t>(max_k - 3)));

    const bool normalized = rng.next_below(2) == 0;
    inst.a = condebate::Tensor4(batch, heads, q_len, k_len);
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            double row_sum = 0.0;
            for (int j = 0; j < k_len; ++j) {
                for (int i = 0; i < q_len; ++i) {
                    double v = normalized ? rng.next_double() + 1e-4
                                          : rng.next_double() * 6.0 - 3.0;
                    inst.a.at(b, h, i, j) = v;
                    if (i == 0) {
                        row_sum += v;
                    }
                }
            }
            if (normalized) {
                for (int i = 0; i < q_len; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < k_len; ++j) {
                        s += inst.a.at(b, h, i, j);
                    }
                    for (int j = 0; j < k_len; ++j) {
                        inst.a.at(b, h, i, j) /= s;
                    }
                }
            }
        }
    }

    const int n_ranges = static_cast<int>(rng.next_below(static_cast<uint32_t>(max_ranges + 1)));
    int cursor = 0;
    for (int r = 0; r < n_ranges && cursor < k_len - 1; ++r) {
        int start = cursor + static_cast<int>(rng.next_below(3));
        if (start >= k_len - 1) {
            break;
        }
        int max_len = k_len - start;
        int len = 1 + static_cast<int>(rng.next_below(static_cast<uint32_t>(std::min(max_len, 12))));
        double weight = 0.5 + rng.next_double() * 11.5;
        inst.ranges.push_back({start, start + len, weight});
        cursor = start + len;
    }

    inst.cfg.lambda = vary_lambda ? 0.5 + rng.next_double() * 1.5 : 1.0;
    inst.cfg.epsilon = 1e-5;
    return inst;
}

} // namespace corpus
