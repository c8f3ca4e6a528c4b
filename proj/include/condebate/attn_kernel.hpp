#pragma once

#include "condebate/tensor.hpp"

#include <vector>

namespace condebate {

// Half-open token span [start, end) with a positive confidence weight.
// Within one adjustment request, ranges must be sorted by start, pairwise
// disjoint and in-bounds for the tensor's key axis.
struct RangeWeight {
    int start = 0;
    int end = 0;
    double weight = 1.0;
};

enum class RangePlacement {
    PostSoftmax, // adjust normalized probabilities (sum-preserving renorm semantics)
    PreSoftmax,  // adjust raw scores before softmax
};

struct RangeScalingConfig {
    double lambda = 1.0;   // global importance scalar applied once per range slice
    double epsilon = 1e-5; // std stabilizer in the importance divisor
    RangePlacement placement = RangePlacement::PostSoftmax;
    bool clamp_nonnegative = false; // floor adjusted entries at 0 before renormalization
};

struct QKV {
    Tensor4 q; // (batch, heads, q_len, d_k)
    Tensor4 k; // (batch, heads, k_len, d_k)
    Tensor4 v; // (batch, heads, k_len, d_v)
};

struct AttentionResult {
    Tensor4 output;  // (batch, heads, q_len, d_v)
    Tensor4 weights; // (batch, heads, q_len, k_len), post-adjustment
};

// Throws RangeValidationError unless the list is sorted, disjoint, in
// [0, k_len] and every weight is positive and finite.
void validate_ranges(const std::vector<RangeWeight> & ranges, int k_len);

// A = Q . K^T, shape (batch, heads, q_len, k_len).
Tensor4 raw_scores(const Tensor4 & q, const Tensor4 & k);

// Row-wise softmax of a / sqrt(d_k), max-subtraction stabilized.
Tensor4 softmax_scaled(const Tensor4 & a, int d_k);

// Confidence-based range adjustment. Skips (returns the input unchanged)
// when fewer than two ranges are given or q_len != 1; otherwise scales each
// range slice by weighted importance and weight, then rescales the union of
// slices so its total mass is preserved. Entries outside every range are
// untouched.
Tensor4 apply_range_weights(const Tensor4 & a,
                            const std::vector<RangeWeight> & ranges,
                            const RangeScalingConfig & cfg);

// Full pipeline: raw scores, range adjustment at the configured placement,
// scaled softmax, then weights . V. Returns both the output and the final
// attention weights.
AttentionResult attention(const QKV & qkv,
                          const std::vector<RangeWeight> & ranges,
                          const RangeScalingConfig & cfg);

} // namespace condebate
