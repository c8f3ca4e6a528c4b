#include "condebate/attn_kernel.hpp"

#include <cmath>
#include <string>

namespace condebate {

void validate_ranges(const std::vector<RangeWeight> & ranges, int k_len) {
    int prev_end = 0;
    bool first = true;
    for (const auto & r : ranges) {
        if (r.start < 0 || r.end > k_len || r.start >= r.end) {
            throw RangeValidationError(
                "range [" + std::to_string(r.start) + ", " + std::to_string(r.end) +
                ") out of bounds for k_len " + std::to_string(k_len));
        }
        if (!first && r.start < prev_end) {
            throw RangeValidationError(
                "ranges must be sorted by start and pairwise disjoint; [" +
                std::to_string(r.start) + ", " + std::to_string(r.end) +
                ") begins before previous end " + std::to_string(prev_end));
        }
        if (!(r.weight > 0.0) || !std::isfinite(r.weight)) {
            throw RangeValidationError("range weight must be positive and finite, got " +
                                       std::to_string(r.weight));
        }
        prev_end = r.end;
        first = false;
    }
}

Tensor4 raw_scores(const Tensor4 & q, const Tensor4 & k) {
    const auto & qd = q.dims();
    const auto & kd = k.dims();
    if (qd[0] != kd[0] || qd[1] != kd[1] || qd[3] != kd[3]) {
        throw DimensionError("raw_scores: q " + q.shape_string() + " and k " +
                             k.shape_string() +
                             " must agree on batch, heads and d_k");
    }
    const int batch = qd[0], heads = qd[1], q_len = qd[2], k_len = kd[2], d_k = qd[3];
    Tensor4 a(batch, heads, q_len, k_len);
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            for (int i = 0; i < q_len; ++i) {
                for (int j = 0; j < k_len; ++j) {
                    double dot = 0.0;
                    for (int d = 0; d < d_k; ++d) {
                        dot += q.at(b, h, i, d) * k.at(b, h, j, d);
                    }
                    a.at(b, h, i, j) = dot;
                }
            }
        }
    }
    return a;
}

Tensor4 softmax_scaled(const Tensor4 & a, int d_k) {
    if (d_k < 1) {
        throw DimensionError("softmax_scaled: d_k must be a positive integer, got " +
                             std::to_string(d_k));
    }
    const auto & d = a.dims();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    Tensor4 out(d[0], d[1], d[2], d[3]);
    for (int b = 0; b < d[0]; ++b) {
        for (int h = 0; h < d[1]; ++h) {
            for (int i = 0; i < d[2]; ++i) {
                double row_max = -HUGE_VAL;
                for (int j = 0; j < d[3]; ++j) {
                    double x = a.at(b, h, i, j);
                    if (!std::isfinite(x)) {
                        throw NumericDomainError(
                            "softmax_scaled: non-finite input at (" + std::to_string(b) +
                            ", " + std::to_string(h) + ", " + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
                    }
                    double s = x * inv_scale;
                    if (s > row_max) {
                        row_max = s;
                    }
                }
                double denom = 0.0;
                for (int j = 0; j < d[3]; ++j) {
                    double e = std::exp(a.at(b, h, i, j) * inv_scale - row_max);
                    out.at(b, h, i, j) = e;
                    denom += e;
                }
                for (int j = 0; j < d[3]; ++j) {
                    out.at(b, h, i, j) /= denom;
                }
            }
        }
    }
    return out;
}

Tensor4 apply_range_weights(const Tensor4 & a,
                            const std::vector<RangeWeight> & ranges,
                            const RangeScalingConfig & cfg) {
    const auto & d = a.dims();
    validate_ranges(ranges, d[3]);

    Tensor4 out = a;
    // Guard mirrors the q_len == 1 decode condition: with more than one range
    // and a single query row, adjust; otherwise pass through unchanged.
    if (ranges.size() <= 1 || d[2] != 1) {
        return out;
    }

    const int batch = d[0], heads = d[1], q_len = d[2];

    double original_sum = 0.0;
    for (const auto & r : ranges) {
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                for (int i = 0; i < q_len; ++i) {
                    for (int j = r.start; j < r.end; ++j) {
                        original_sum += out.at(b, h, i, j);
                    }
                }
            }
        }
    }

    for (const auto & r : ranges) {
        const int len = r.end - r.start;
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                for (int i = 0; i < q_len; ++i) {
                    double mean = 0.0;
                    for (int j = r.start; j < r.end; ++j) {
                        mean += out.at(b, h, i, j);
                    }
                    mean /= len;
                    // Population std; a length-1 slice gives 0 and epsilon dominates.
                    double var = 0.0;
                    for (int j = r.start; j < r.end; ++j) {
                        double dev = out.at(b, h, i, j) - mean;
                        var += dev * dev;
                    }
                    var /= len;
                    double sigma = std::sqrt(var);
                    double weighted_mean = mean * r.weight;
                    for (int j = r.start; j < r.end; ++j) {
                        double x = out.at(b, h, i, j);
                        double importance = 1.0 + (x - weighted_mean) / (sigma + cfg.epsilon);
                        double adjusted = x * importance * r.weight * cfg.lambda;
                        if (cfg.clamp_nonnegative && adjusted < 0.0) {
                            adjusted = 0.0;
                        }
                        out.at(b, h, i, j) = adjusted;
                    }
                }
            }
        }
    }

    double new_sum = 0.0;
    for (const auto & r : ranges) {
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                for (int i = 0; i < q_len; ++i) {
                    for (int j = r.start; j < r.end; ++j) {
                        new_sum += out.at(b, h, i, j);
                    }
                }
            }
        }
    }

    if (new_sum == 0.0 || !std::isfinite(new_sum)) {
        throw DegenerateAdjustmentError(
            "apply_range_weights: adjusted in-range mass is unusable (original_sum " +
                std::to_string(original_sum) + ", new_sum " + std::to_string(new_sum) + ")",
            original_sum, new_sum);
    }

    const double norm = original_sum / new_sum;
    for (const auto & r : ranges) {
        for (int b = 0; b < batch; ++b) {
            for (int h = 0; h < heads; ++h) {
                for (int i = 0; i < q_len; ++i) {
                    for (int j = r.start; j < r.end; ++j) {
                        out.at(b, h, i, j) *= norm;
                    }
                }
            }
        }
    }
    return out;
}

AttentionResult attention(const QKV & qkv,
                          const std::vector<RangeWeight> & ranges,
                          const RangeScalingConfig & cfg) {
    const auto & kd = qkv.k.dims();
    const auto & vd = qkv.v.dims();
    if (kd[0] != vd[0] || kd[1] != vd[1] || kd[2] != vd[2]) {
        throw DimensionError("attention: k " + qkv.k.shape_string() + " and v " +
                             qkv.v.shape_string() +
                             " must agree on batch, heads and k_len");
    }
    const int d_k = qkv.q.dim(3);

    Tensor4 scores = raw_scores(qkv.q, qkv.k);
    Tensor4 weights;
    if (cfg.placement == RangePlacement::PreSoftmax) {
        weights = softmax_scaled(apply_range_weights(scores, ranges, cfg), d_k);
    } else {
        weights = apply_range_weights(softmax_scaled(scores, d_k), ranges, cfg);
    }

    const auto & wd = weights.dims();
    const int batch = wd[0], heads = wd[1], q_len = wd[2], k_len = wd[3], d_v = vd[3];
    Tensor4 output(batch, heads, q_len, d_v);
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            for (int i = 0; i < q_len; ++i) {
                for (int dv = 0; dv < d_v; ++dv) {
                    double acc = 0.0;
                    for (int j = 0; j < k_len; ++j) {
                        acc += weights.at(b, h, i, j) * qkv.v.at(b, h, j, dv);
                    }
                    output.at(b, h, i, dv) = acc;
                }
            }
        }
    }
    return {std::move(output), std::move(weights)};
}

} // namespace condebate
