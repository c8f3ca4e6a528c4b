#include "condebate/toy_decoder.hpp"

#include "condebate/errors.hpp"
#include "condebate/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace condebate {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kMaskValue = -1e9;

void fill_normal(std::vector<double> & v, Pcg32 & rng, double stddev) {
    for (auto & x : v) {
        x = rng.next_normal(0.0, stddev);
    }
}

// Row-softmax of a plain vector, max-stabilized; returns log-probs too.
void softmax_vec(const std::vector<double> & logits, std::vector<double> & probs) {
    double m = -HUGE_VAL;
    for (double x : logits) {
        m = std::max(m, x);
    }
    double den = 0.0;
    probs.resize(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - m);
        den += probs[i];
    }
    for (auto & p : probs) {
        p /= den;
    }
}

} // namespace

ToyDecoder::ToyDecoder(const DecoderConfig & cfg) : cfg_(cfg) {
    if (cfg.vocab_size < 2) {
        throw ConfigError("ToyDecoder: vocab_size must be >= 2");
    }
    if (cfg.d_model < 1 || cfg.heads < 1 || cfg.d_model % cfg.heads != 0) {
        throw ConfigError("ToyDecoder: d_model must be positive and divisible by heads");
    }
    if (cfg.max_seq < 1) {
        throw ConfigError("ToyDecoder: max_seq must be >= 1");
    }

    const int D = cfg.d_model;
    const int F = 4 * D;
    Pcg32 rng(cfg.seed, 0x746f79ULL); // dedicated parameter stream

    tok_emb_.init(cfg.vocab_size, D);
    pos_emb_.init(cfg.max_seq, D);
    wq_.init(D, D);
    wk_.init(D, D);
    wv_.init(D, D);
    wo_.init(D, D);
    ffn_w1_.init(D, F);
    ffn_w2_.init(F, D);
    head_.init(D, cfg.vocab_size);

    const double s = 0.02;
    fill_normal(tok_emb_.w, rng, s);
    fill_normal(pos_emb_.w, rng, s);
    fill_normal(wq_.w, rng, s);
    fill_normal(wk_.w, rng, s);
    fill_normal(wv_.w, rng, s);
    fill_normal(wo_.w, rng, s);

    auto init_ln = [&](std::vector<double> & g, std::vector<double> & b) {
        g.resize(static_cast<size_t>(D));
        b.resize(static_cast<size_t>(D));
        for (int i = 0; i < D; ++i) {
            g[static_cast<size_t>(i)] = 1.0 + rng.next_normal(0.0, s);
            b[static_cast<size_t>(i)] = rng.next_normal(0.0, s);
        }
    };
    init_ln(ln1_g_, ln1_b_);
    init_ln(ln2_g_, ln2_b_);
    init_ln(lnf_g_, lnf_b_);

    fill_normal(ffn_w1_.w, rng, s);
    ffn_b1_.assign(static_cast<size_t>(F), 0.0);
    fill_normal(ffn_b1_, rng, s);
    fill_normal(ffn_w2_.w, rng, s);
    ffn_b2_.assign(static_cast<size_t>(D), 0.0);
    fill_normal(ffn_b2_, rng, s);
    fill_normal(head_.w, rng, s);
}

int64_t ToyDecoder::parameter_count() const {
    const int64_t V = cfg_.vocab_size, D = cfg_.d_model, S = cfg_.max_seq, F = 4 * D;
    return V * D + S * D + 4 * D * D + 3 * 2 * D + D * F + F + F * D + D + D * V;
}

uint64_t ToyDecoder::parameter_checksum() const {
    uint64_t h = 1469598103934665603ULL; // FNV-1a
    auto mix = [&h](const std::vector<double> & v) {
        for (double x : v) {
            uint64_t bits;
            std::memcpy(&bits, &x, sizeof(bits));
            for (int byte = 0; byte < 8; ++byte) {
                h ^= (bits >> (8 * byte)) & 0xffULL;
                h *= 1099511628211ULL;
            }
        }
    };
    mix(tok_emb_.w);
    mix(pos_emb_.w);
    mix(wq_.w);
    mix(wk_.w);
    mix(wv_.w);
    mix(wo_.w);
    mix(ln1_g_);
    mix(ln1_b_);
    mix(ln2_g_);
    mix(ln2_b_);
    mix(lnf_g_);
    mix(lnf_b_);
    mix(ffn_w1_.w);
    mix(ffn_b1_);
    mix(ffn_w2_.w);
    mix(ffn_b2_);
    mix(head_.w);
    return h;
}

std::vector<double> ToyDecoder::layer_norm(const std::vector<double> & x,
                                           const std::vector<double> & gamma,
                                           const std::vector<double> & beta) const {
    const size_t n = x.size();
    double mean = 0.0;
    for (double v : x) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
    }
    return out;
}

std::vector<double> ToyDecoder::logits_at_last(const std::vector<int> & tokens,
                                               const std::vector<RangeWeight> & ranges,
                                               bool prefill,
                                               const GenerateOptions & opts,
                                               AttentionTrace * trace) const {
    const int L = static_cast<int>(tokens.size());
    const int D = cfg_.d_model;
    const int H = cfg_.heads;
    const int dh = D / H;
    const int q_len = prefill ? L : 1;
    const int q_base = prefill ? 0 : L - 1;

    // Embeddings and the pre-attention norm for every position; K and V are
    // recomputed from scratch each call (single layer, so this is exact).
    std::vector<std::vector<double>> emb(static_cast<size_t>(L));
    std::vector<std::vector<double>> normed(static_cast<size_t>(L));
    for (int i = 0; i < L; ++i) {
        std::vector<double> e(static_cast<size_t>(D));
        for (int d = 0; d < D; ++d) {
            e[static_cast<size_t>(d)] = tok_emb_.at(tokens[static_cast<size_t>(i)], d) +
                                        pos_emb_.at(i, d);
        }
        normed[static_cast<size_t>(i)] = layer_norm(e, ln1_g_, ln1_b_);
        emb[static_cast<size_t>(i)] = std::move(e);
    }

    QKV qkv{Tensor4(1, H, q_len, dh), Tensor4(1, H, L, dh), Tensor4(1, H, L, dh)};
    auto project = [&](const Mat & w, const std::vector<double> & x, int col) {
        double acc = 0.0;
        for (int d = 0; d < D; ++d) {
            acc += x[static_cast<size_t>(d)] * w.at(d, col);
        }
        return acc;
    };
    for (int i = 0; i < L; ++i) {
        const auto & x = normed[static_cast<size_t>(i)];
        for (int h = 0; h < H; ++h) {
            for (int d = 0; d < dh; ++d) {
                qkv.k.at(0, h, i, d) = project(wk_, x, h * dh + d);
                qkv.v.at(0, h, i, d) = project(wv_, x, h * dh + d);
            }
        }
    }
    for (int qi = 0; qi < q_len; ++qi) {
        const auto & x = normed[static_cast<size_t>(q_base + qi)];
        for (int h = 0; h < H; ++h) {
            for (int d = 0; d < dh; ++d) {
                qkv.q.at(0, h, qi, d) = project(wq_, x, h * dh + d);
            }
        }
    }

    Tensor4 scores = raw_scores(qkv.q, qkv.k);
    if (prefill) {
        // Causal mask: query at absolute position q_base+qi sees keys <= it.
        for (int h = 0; h < H; ++h) {
            for (int qi = 0; qi < q_len; ++qi) {
                for (int j = q_base + qi + 1; j < L; ++j) {
                    scores.at(0, h, qi, j) = kMaskValue;
                }
            }
        }
    }

    Tensor4 weights;
    Tensor4 pre;
    if (opts.bypass_range_adjustment) {
        weights = softmax_scaled(scores, dh);
        pre = weights;
    } else if (opts.scaling.placement == RangePlacement::PreSoftmax) {
        pre = scores;
        weights = softmax_scaled(apply_range_weights(scores, ranges, opts.scaling), dh);
    } else {
        pre = softmax_scaled(scores, dh);
        weights = apply_range_weights(pre, ranges, opts.scaling);
    }
    if (trace != nullptr) {
        if (prefill) {
            trace->prefill_pre = pre;
            trace->prefill_post = weights;
        } else {
            trace->decode_pre.push_back(pre);
            trace->decode_post.push_back(weights);
        }
    }

    // Attention output for the last query row only; later stages need just it.
    const int last_q = q_len - 1;
    std::vector<double> attn_out(static_cast<size_t>(D));
    for (int h = 0; h < H; ++h) {
        for (int d = 0; d < dh; ++d) {
            double acc = 0.0;
            for (int j = 0; j < L; ++j) {
                acc += weights.at(0, h, last_q, j) * qkv.v.at(0, h, j, d);
            }
            attn_out[static_cast<size_t>(h * dh + d)] = acc;
        }
    }

    std::vector<double> hres(static_cast<size_t>(D));
    for (int d = 0; d < D; ++d) {
        double o = 0.0;
        for (int dd = 0; dd < D; ++dd) {
            o += attn_out[static_cast<size_t>(dd)] * wo_.at(dd, d);
        }
        hres[static_cast<size_t>(d)] = emb[static_cast<size_t>(L - 1)][static_cast<size_t>(d)] + o;
    }

    const int F = 4 * D;
    std::vector<double> y = layer_norm(hres, ln2_g_, ln2_b_);
    std::vector<double> hidden(static_cast<size_t>(F));
    for (int f = 0; f < F; ++f) {
        double acc = ffn_b1_[static_cast<size_t>(f)];
        for (int d = 0; d < D; ++d) {
            acc += y[static_cast<size_t>(d)] * ffn_w1_.at(d, f);
        }
        hidden[static_cast<size_t>(f)] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> z(static_cast<size_t>(D));
    for (int d = 0; d < D; ++d) {
        double acc = ffn_b2_[static_cast<size_t>(d)];
        for (int f = 0; f < F; ++f) {
            acc += hidden[static_cast<size_t>(f)] * ffn_w2_.at(f, d);
        }
        z[static_cast<size_t>(d)] = hres[static_cast<size_t>(d)] + acc;
    }

    std::vector<double> final_norm = layer_norm(z, lnf_g_, lnf_b_);
    std::vector<double> logits(static_cast<size_t>(cfg_.vocab_size));
    for (int v = 0; v < cfg_.vocab_size; ++v) {
        double acc = 0.0;
        for (int d = 0; d < D; ++d) {
            acc += final_norm[static_cast<size_t>(d)] * head_.at(d, v);
        }
        logits[static_cast<size_t>(v)] = acc;
    }
    return logits;
}

std::vector<GenerationStep> ToyDecoder::generate(const std::vector<int> & prompt_tokens,
                                                 const std::vector<RangeWeight> & ranges,
                                                 int max_new,
                                                 uint64_t sampling_seed,
                                                 const GenerateOptions & opts,
                                                 AttentionTrace * trace) const {
    if (prompt_tokens.empty()) {
        throw EmptyInputError("ToyDecoder::generate: prompt must contain at least one token");
    }
    if (static_cast<int>(prompt_tokens.size()) + max_new > cfg_.max_seq) {
        throw CapacityError("ToyDecoder::generate: prompt " +
                            std::to_string(prompt_tokens.size()) + " + max_new " +
                            std::to_string(max_new) + " exceeds max_seq " +
                            std::to_string(cfg_.max_seq));
    }
    for (int t : prompt_tokens) {
        if (t < 0 || t >= cfg_.vocab_size) {
            throw ConfigError("ToyDecoder::generate: token id " + std::to_string(t) +
                              " outside vocabulary");
        }
    }
    const int prompt_len = static_cast<int>(prompt_tokens.size());
    validate_ranges(ranges, prompt_len); // ranges reference prompt positions only

    std::vector<GenerationStep> steps;
    if (max_new <= 0) {
        return steps;
    }

    Pcg32 rng(sampling_seed, 0x73616d70ULL);
    std::vector<int> tokens = prompt_tokens;
    std::vector<double> probs;

    for (int s = 0; s < max_new; ++s) {
        const bool prefill = s == 0;
        std::vector<double> logits = logits_at_last(tokens, ranges, prefill, opts, trace);

        int chosen = 0;
        if (opts.sample) {
            std::vector<double> tempered(logits.size());
            const double t = opts.temperature > 0.0 ? opts.temperature : 1.0;
            for (size_t i = 0; i < logits.size(); ++i) {
                tempered[i] = logits[i] / t;
            }
            softmax_vec(tempered, probs);
            double u = rng.next_double();
            double cum = 0.0;
            chosen = static_cast<int>(probs.size()) - 1;
            for (size_t i = 0; i < probs.size(); ++i) {
                cum += probs[i];
                if (u < cum) {
                    chosen = static_cast<int>(i);
                    break;
                }
            }
        } else {
            for (size_t i = 1; i < logits.size(); ++i) {
                if (logits[i] > logits[static_cast<size_t>(chosen)]) {
                    chosen = static_cast<int>(i);
                }
            }
        }

        softmax_vec(logits, probs);
        GenerationStep step;
        step.token_id = chosen;
        step.logprob_chosen = std::log(probs[static_cast<size_t>(chosen)]);
        step.logits = std::move(logits);
        steps.push_back(std::move(step));
        tokens.push_back(chosen);
    }
    return steps;
}

} // namespace condebate
