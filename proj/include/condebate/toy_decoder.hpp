#pragma once

#include "condebate/attn_kernel.hpp"

#include <cstdint>
#include <vector>

namespace condebate {

struct DecoderConfig {
    int vocab_size = 64;
    int d_model = 32;
    int heads = 4;
    int max_seq = 512;
    uint64_t seed = 0;
};

struct GenerationStep {
    int token_id = 0;
    std::vector<double> logits;  // length vocab_size
    double logprob_chosen = 0.0; // log softmax(logits)[token_id]
};

struct GenerateOptions {
    bool sample = false;      // greedy by default
    double temperature = 1.0; // only used when sample is true
    RangeScalingConfig scaling;
    // Skips the range-adjustment calls entirely; with empty ranges the result
    // must be bit-identical to the normal path (asserted in tests).
    bool bypass_range_adjustment = false;
};

// Per-call attention record for tests: prefill weights before/after the
// adjustment hook and, for every q_len = 1 decode step, both sides of the
// adjustment.
struct AttentionTrace {
    Tensor4 prefill_pre;
    Tensor4 prefill_post;
    std::vector<Tensor4> decode_pre;
    std::vector<Tensor4> decode_post;
};

// Single-layer pre-norm transformer decoder over a small vocabulary with
// seeded untrained weights. Deterministic: equal configs give equal
// parameters, and generate is pure. The first generated token comes from the
// prefill forward (q_len = prompt length, so no range adjustment happens
// there); every later token comes from a q_len = 1 decode step where the
// ranges are applied.
class ToyDecoder {
public:
    explicit ToyDecoder(const DecoderConfig & cfg);

    const DecoderConfig & config() const { return cfg_; }

    int64_t parameter_count() const;
    uint64_t parameter_checksum() const;

    std::vector<GenerationStep> generate(const std::vector<int> & prompt_tokens,
                                         const std::vector<RangeWeight> & ranges,
                                         int max_new,
                                         uint64_t sampling_seed,
                                         const GenerateOptions & opts = {},
                                         AttentionTrace * trace = nullptr) const;

private:
    struct Mat {
        int rows = 0;
        int cols = 0;
        std::vector<double> w;

        void init(int r, int c) {
            rows = r;
            cols = c;
            w.assign(static_cast<size_t>(r) * c, 0.0);
        }
        double & at(int r, int c) { return w[static_cast<size_t>(r) * cols + c]; }
        double at(int r, int c) const { return w[static_cast<size_t>(r) * cols + c]; }
    };

    std::vector<double> layer_norm(const std::vector<double> & x,
                                   const std::vector<double> & gamma,
                                   const std::vector<double> & beta) const;
    std::vector<double> logits_at_last(const std::vector<int> & tokens,
                                       const std::vector<RangeWeight> & ranges,
                                       bool prefill,
                                       const GenerateOptions & opts,
                                       AttentionTrace * trace) const;

    DecoderConfig cfg_;
    Mat tok_emb_;  // vocab x d_model
    Mat pos_emb_;  // max_seq x d_model
    Mat wq_, wk_, wv_, wo_;
    std::vector<double> ln1_g_, ln1_b_, ln2_g_, ln2_b_, lnf_g_, lnf_b_;
    Mat ffn_w1_; // d_model x 4*d_model
    std::vector<double> ffn_b1_;
    Mat ffn_w2_; // 4*d_model x d_model
    std::vector<double> ffn_b2_;
    Mat head_;   // d_model x vocab
};

} // namespace condebate
