#include "condebate/attn_kernel.hpp"
#include "condebate/rng.hpp"

#include "corpus.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace condebate;

namespace {

Tensor4 row_tensor(const std::vector<double> & row) {
    Tensor4 t(1, 1, 1, static_cast<int>(row.size()));
    for (size_t j = 0; j < row.size(); ++j) {
        t.at(0, 0, 0, static_cast<int>(j)) = row[j];
    }
    return t;
}

double max_abs_diff(const Tensor4 & a, const Tensor4 & b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    const auto & d = a.dims();
    for (int b0 = 0; b0 < d[0]; ++b0) {
        for (int h = 0; h < d[1]; ++h) {
            for (int i = 0; i < d[2]; ++i) {
                for (int j = 0; j < d[3]; ++j) {
                    m = std::max(m, std::abs(a.at(b0, h, i, j) - b.at(b0, h, i, j)));
                }
            }
        }
    }
    return m;
}

double union_mass(const Tensor4 & a, const std::vector<RangeWeight> & ranges) {
    double s = 0.0;
    const auto & d = a.dims();
    for (const auto & r : ranges) {
        for (int b = 0; b < d[0]; ++b) {
            for (int h = 0; h < d[1]; ++h) {
                for (int i = 0; i < d[2]; ++i) {
                    for (int j = r.start; j < r.end; ++j) {
                        s += a.at(b, h, i, j);
                    }
                }
            }
        }
    }
    return s;
}

} // namespace

TEST_SUITE("attn_kernel") {

TEST_CASE("raw_scores orthonormal basis") {
    Tensor4 q(1, 1, 1, 2);
    q.at(0, 0, 0, 0) = 1.0;
    Tensor4 k(1, 1, 2, 2);
    k.at(0, 0, 0, 0) = 1.0;
    k.at(0, 0, 1, 1) = 1.0;
    Tensor4 a = raw_scores(q, k);
    CHECK(a.at(0, 0, 0, 0) == 1.0);
    CHECK(a.at(0, 0, 0, 1) == 0.0);
}

TEST_CASE("raw_scores zero query") {
    Tensor4 q(1, 1, 2, 3);
    Tensor4 k(1, 1, 4, 3);
    Pcg32 rng(7);
    for (int j = 0; j < 4; ++j) {
        for (int d = 0; d < 3; ++d) {
            k.at(0, 0, j, d) = rng.next_double();
        }
    }
    Tensor4 a = raw_scores(q, k);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(a.at(0, 0, i, j) == 0.0);
        }
    }
}

TEST_CASE("raw_scores matches brute-force oracle on seeded 2x2x3x4 inputs") {
    Pcg32 rng(1234);
    Tensor4 q(2, 2, 3, 4);
    Tensor4 k(2, 2, 5, 4);
    for (size_t i = 0; i < q.size(); ++i) {
        q.data()[i] = rng.next_double() * 2.0 - 1.0;
    }
    for (size_t i = 0; i < k.size(); ++i) {
        k.data()[i] = rng.next_double() * 2.0 - 1.0;
    }
    Tensor4 a = raw_scores(q, k);
    Tensor4 ref = oracles::matmul_scores(q, k);
    CHECK(max_abs_diff(a, ref) < 1e-9);
}

TEST_CASE("raw_scores rejects mismatched shapes naming both") {
    Tensor4 q(1, 1, 1, 3);
    Tensor4 k(1, 1, 2, 4);
    try {
        raw_scores(q, k);
        FAIL("expected DimensionError");
    } catch (const DimensionError & e) {
        std::string msg = e.what();
        CHECK(msg.find("(1, 1, 1, 3)") != std::string::npos);
        CHECK(msg.find("(1, 1, 2, 4)") != std::string::npos);
    }
}

TEST_CASE("softmax_scaled uniform row") {
    Tensor4 a = row_tensor({0.0, 0.0, 0.0});
    Tensor4 p = softmax_scaled(a, 1);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(p.at(0, 0, 0, j) - 1.0 / 3.0) < 1e-15);
    }
}

TEST_CASE("softmax_scaled shift invariance, including large magnitudes") {
    const double ln2 = 0.69314718055994529;
    for (double c : {-1e4, -3.0, 0.0, 42.0, 1e4}) {
        Tensor4 a = row_tensor({c, c + ln2});
        Tensor4 p = softmax_scaled(a, 1);
        CHECK(std::abs(p.at(0, 0, 0, 0) - 1.0 / 3.0) < 1e-12);
        CHECK(std::abs(p.at(0, 0, 0, 1) - 2.0 / 3.0) < 1e-12);
    }
}

TEST_CASE("softmax_scaled matches high-precision oracle on [1,2,3] with d_k=4") {
    // Frozen from the long-double oracle.
    const double expected[3] = {0.18632372322584759, 0.30719588571849837,
                                0.50648039105565401};
    Tensor4 a = row_tensor({1.0, 2.0, 3.0});
    Tensor4 p = softmax_scaled(a, 4);
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(p.at(0, 0, 0, j) - expected[j]) < 1e-9);
        sum += p.at(0, 0, 0, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);

    Tensor4 ref = oracles::softmax_scaled(a, 4);
    CHECK(max_abs_diff(p, ref) < 1e-9);
}

TEST_CASE("softmax_scaled rejects non-finite input and bad d_k") {
    Tensor4 a = row_tensor({1.0, std::nan(""), 0.0});
    CHECK_THROWS_AS(softmax_scaled(a, 1), NumericDomainError);
    Tensor4 inf_row = row_tensor({1.0, HUGE_VAL});
    CHECK_THROWS_AS(softmax_scaled(inf_row, 1), NumericDomainError);
    CHECK_THROWS_AS(softmax_scaled(row_tensor({1.0}), 0), DimensionError);
}

TEST_CASE("apply_range_weights guard: single range returns input bit-identical") {
    Tensor4 a = row_tensor({0.3, 0.2, 0.1, 0.4});
    Tensor4 out = apply_range_weights(a, {{0, 2, 5.0}}, {});
    CHECK(out.bit_identical(a));
}

TEST_CASE("apply_range_weights guard: q_len != 1 returns input bit-identical") {
    Tensor4 a(1, 2, 3, 6);
    Pcg32 rng(99);
    for (size_t i = 0; i < a.size(); ++i) {
        a.data()[i] = rng.next_double();
    }
    Tensor4 out = apply_range_weights(a, {{0, 2, 2.0}, {3, 5, 4.0}}, {});
    CHECK(out.bit_identical(a));
}

TEST_CASE("apply_range_weights constant slices with unit weights are a fixed point") {
    Tensor4 a = row_tensor({0.25, 0.25, 0.25, 0.25});
    Tensor4 out = apply_range_weights(a, {{0, 2, 1.0}, {2, 4, 1.0}}, {});
    CHECK(out.bit_identical(a));
}

TEST_CASE("apply_range_weights matches the scalar oracle on the pinned row") {
    // Frozen from the scalar oracle: the second range's weighted mean exceeds
    // its entries, so the pre-normalization union mass goes negative and the
    // renormalization factor flips sign, exactly as the literal procedure says.
    const double expected[4] = {-2.5642143375449248e-06, -0.051289415179636054,
                                0.53846962559906464, 0.51282235379490893};
    Tensor4 a = row_tensor({0.1, 0.2, 0.3, 0.4});
    std::vector<RangeWeight> ranges = {{0, 2, 1.0}, {2, 4, 2.0}};
    Tensor4 out = apply_range_weights(a, ranges, {});
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(out.at(0, 0, 0, j) - expected[j]) < 1e-9);
    }
    CHECK(std::abs(union_mass(out, ranges) - 1.0) < 1e-6);

    Tensor4 ref = oracles::algorithm1(a, ranges);
    CHECK(max_abs_diff(out, ref) < 1e-9);
}

TEST_CASE("apply_range_weights validates ranges") {
    Tensor4 a = row_tensor({0.1, 0.2, 0.3, 0.4});
    CHECK_THROWS_AS(apply_range_weights(a, {{0, 5, 1.0}, {5, 6, 1.0}}, {}),
                    RangeValidationError);
    CHECK_THROWS_AS(apply_range_weights(a, {{0, 2, 1.0}, {1, 3, 1.0}}, {}),
                    RangeValidationError);
    CHECK_THROWS_AS(apply_range_weights(a, {{2, 4, 1.0}, {0, 2, 1.0}}, {}),
                    RangeValidationError);
    CHECK_THROWS_AS(apply_range_weights(a, {{0, 2, 0.0}, {2, 4, 1.0}}, {}),
                    RangeValidationError);
    CHECK_THROWS_AS(apply_range_weights(a, {{0, 0, 1.0}, {2, 4, 1.0}}, {}),
                    RangeValidationError);
}

TEST_CASE("apply_range_weights degenerate zero mass raises with both sums") {
    // Both length-1 slices go hugely negative, the clamp floors them to zero,
    // leaving nothing to renormalize.
    Tensor4 a = row_tensor({0.5, 0.5});
    RangeScalingConfig cfg;
    cfg.clamp_nonnegative = true;
    try {
        apply_range_weights(a, {{0, 1, 200.0}, {1, 2, 200.0}}, cfg);
        FAIL("expected DegenerateAdjustmentError");
    } catch (const DegenerateAdjustmentError & e) {
        CHECK(e.new_sum == 0.0);
        CHECK(std::abs(e.original_sum - 1.0) < 1e-12);
    }
}

TEST_CASE("apply_range_weights clamp floors entries then renormalizes") {
    Tensor4 a = row_tensor({0.5, 0.5});
    RangeScalingConfig cfg;
    cfg.clamp_nonnegative = true;
    Tensor4 out = apply_range_weights(a, {{0, 1, 200.0}, {1, 2, 1.0}}, cfg);
    CHECK(out.at(0, 0, 0, 0) == 0.0);
    CHECK(std::abs(out.at(0, 0, 0, 1) - 1.0) < 1e-12);
    CHECK(std::abs(union_mass(out, {{0, 1, 200.0}, {1, 2, 1.0}}) - 1.0) < 1e-9);
}

TEST_CASE("apply_range_weights property corpus vs oracle") {
    Pcg32 rng(20240917);
    int adjusted_cases = 0;
    for (int iter = 0; iter < 1000; ++iter) {
        auto inst = corpus::make_instance(rng, 64, 4, /*vary_lambda=*/true);
        Tensor4 out = apply_range_weights(inst.a, inst.ranges, inst.cfg);
        Tensor4 again = apply_range_weights(inst.a, inst.ranges, inst.cfg);
        CHECK(out.bit_identical(again)); // determinism

        const bool skipped = inst.ranges.size() <= 1 || inst.a.dim(2) != 1;
        if (skipped) {
            CHECK(out.bit_identical(inst.a));
            continue;
        }
        ++adjusted_cases;

        Tensor4 ref = oracles::algorithm1(inst.a, inst.ranges, inst.cfg.epsilon,
                                          inst.cfg.lambda);
        CHECK(max_abs_diff(out, ref) < 1e-8);

        const double before = union_mass(inst.a, inst.ranges);
        const double after = union_mass(out, inst.ranges);
        CHECK(std::abs(after - before) <= 1e-6 * std::max(1.0, std::abs(before)));

        // Outside-range entries are bit-identical.
        const auto & d = inst.a.dims();
        std::vector<bool> covered(static_cast<size_t>(d[3]), false);
        for (const auto & r : inst.ranges) {
            for (int j = r.start; j < r.end; ++j) {
                covered[static_cast<size_t>(j)] = true;
            }
        }
        for (int b = 0; b < d[0]; ++b) {
            for (int h = 0; h < d[1]; ++h) {
                for (int j = 0; j < d[3]; ++j) {
                    if (!covered[static_cast<size_t>(j)]) {
                        CHECK(out.at(b, h, 0, j) == inst.a.at(b, h, 0, j));
                    }
                }
            }
        }
    }
    // The corpus must actually exercise the adjustment path.
    CHECK(adjusted_cases > 300);
}

TEST_CASE("attention with empty ranges equals plain attention") {
    Pcg32 rng(5150);
    QKV qkv{Tensor4(1, 2, 1, 4), Tensor4(1, 2, 6, 4), Tensor4(1, 2, 6, 3)};
    for (size_t i = 0; i < qkv.q.size(); ++i) {
        qkv.q.data()[i] = rng.next_double() - 0.5;
    }
    for (size_t i = 0; i < qkv.k.size(); ++i) {
        qkv.k.data()[i] = rng.next_double() - 0.5;
    }
    for (size_t i = 0; i < qkv.v.size(); ++i) {
        qkv.v.data()[i] = rng.next_double() - 0.5;
    }
    auto res = attention(qkv, {}, {});
    Tensor4 plain = softmax_scaled(raw_scores(qkv.q, qkv.k), 4);
    CHECK(res.weights.bit_identical(plain));
    Tensor4 out_ref = oracles::weights_times_v(plain, qkv.v);
    CHECK(max_abs_diff(res.output, out_ref) < 1e-12);
}

TEST_CASE("attention with one-hot values passes weights through") {
    Pcg32 rng(777);
    const int k_len = 5;
    QKV qkv{Tensor4(1, 1, 1, 3), Tensor4(1, 1, k_len, 3), Tensor4(1, 1, k_len, k_len)};
    for (size_t i = 0; i < qkv.q.size(); ++i) {
        qkv.q.data()[i] = rng.next_double();
    }
    for (size_t i = 0; i < qkv.k.size(); ++i) {
        qkv.k.data()[i] = rng.next_double();
    }
    for (int j = 0; j < k_len; ++j) {
        qkv.v.at(0, 0, j, j) = 1.0;
    }
    auto res = attention(qkv, {{0, 2, 3.0}, {2, 4, 1.5}}, {});
    for (int j = 0; j < k_len; ++j) {
        CHECK(std::abs(res.output.at(0, 0, 0, j) - res.weights.at(0, 0, 0, j)) < 1e-12);
    }
}

TEST_CASE("attention matches the composed oracle under both placements") {
    Pcg32 rng(31337);
    for (auto placement : {RangePlacement::PostSoftmax, RangePlacement::PreSoftmax}) {
        QKV qkv{Tensor4(2, 2, 1, 4), Tensor4(2, 2, 10, 4), Tensor4(2, 2, 10, 3)};
        for (size_t i = 0; i < qkv.q.size(); ++i) {
            qkv.q.data()[i] = rng.next_double() * 2.0 - 1.0;
        }
        for (size_t i = 0; i < qkv.k.size(); ++i) {
            qkv.k.data()[i] = rng.next_double() * 2.0 - 1.0;
        }
        for (size_t i = 0; i < qkv.v.size(); ++i) {
            qkv.v.data()[i] = rng.next_double() * 2.0 - 1.0;
        }
        std::vector<RangeWeight> ranges = {{1, 4, 6.5}, {5, 9, 2.0}};
        RangeScalingConfig cfg;
        cfg.placement = placement;
        auto res = attention(qkv, ranges, cfg);
        Tensor4 w_ref = oracles::attention_weights(qkv.q, qkv.k, ranges, cfg);
        CHECK(max_abs_diff(res.weights, w_ref) < 1e-8);
        Tensor4 out_ref = oracles::weights_times_v(w_ref, qkv.v);
        CHECK(max_abs_diff(res.output, out_ref) < 1e-8);
    }
}

TEST_CASE("attention rejects k/v disagreement") {
    QKV qkv{Tensor4(1, 1, 1, 4), Tensor4(1, 1, 6, 4), Tensor4(1, 1, 5, 3)};
    CHECK_THROWS_AS(attention(qkv, {}, {}), DimensionError);
}

TEST_CASE("tensor rejects non-positive extents") {
    CHECK_THROWS_AS(Tensor4(0, 1, 1, 1), DimensionError);
    CHECK_THROWS_AS(Tensor4(1, 1, -2, 1), DimensionError);
}

} // TEST_SUITE
