#pragma once

#include "condebate/attn_kernel.hpp"
#include "condebate/tokenizer.hpp"
#include "condebate/toy_decoder.hpp"

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace condebate {

// One quoted agent block inside a prompt, with token-span bookkeeping and the
// quoted agent's confidence at build time.
struct PromptBlock {
    int agent_id = -1;
    int source_round = -1; // round the quoted response came from
    int token_start = 0;
    int token_end = 0; // half-open token range over the prompt
    double confidence = 1.0;
    bool is_self = false;
    bool used_for_attention = false;
};

struct PromptWithSpans {
    std::string text;
    std::vector<PromptBlock> blocks;
    // Method-filtered spans handed to range-capable backends; weights equal
    // the covered agents' confidences.
    std::vector<RangeWeight> attention_ranges;
};

struct GenerationResult {
    std::string text;
    std::vector<TokenSpan> token_spans;
    std::optional<std::vector<double>> chosen_logprobs;
    std::optional<std::vector<std::vector<double>>> step_distributions;
};

struct BackendCapabilities {
    bool supports_attention_ranges = false;
    bool supports_logprobs = false;
};

// Uniform model-agent abstraction. generate must be safe for concurrent
// callers; seeds make deterministic backends pure functions of their inputs.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string name() const = 0;
    virtual BackendCapabilities capabilities() const = 0;
    virtual GenerationResult generate(const PromptWithSpans & prompt,
                                      const std::vector<RangeWeight> & ranges,
                                      int max_new,
                                      uint64_t seed) = 0;

protected:
    // Shared guard: backends that cannot steer attention refuse ranges.
    void require_range_support(const std::vector<RangeWeight> & ranges) const;
};

// Wraps a ToyDecoder + WordTokenizer; ranges flow into the decoder's
// attention. Samples with temperature 1 by default so untrained weights do
// not lock into greedy token loops.
class ToyDecoderBackend : public Backend {
public:
    explicit ToyDecoderBackend(const DecoderConfig & cfg, GenerateOptions opts = default_options());

    static GenerateOptions default_options();

    std::string name() const override { return "toy"; }
    BackendCapabilities capabilities() const override { return {true, true}; }
    GenerationResult generate(const PromptWithSpans & prompt,
                              const std::vector<RangeWeight> & ranges,
                              int max_new,
                              uint64_t seed) override;

private:
    ToyDecoder decoder_;
    WordTokenizer tokenizer_;
    GenerateOptions opts_;
};

// Returns scripted responses in call order; repeats the last entry once the
// script is exhausted. State advances atomically per call.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::vector<std::string> script);

    // JSON fixture: an object mapping stringified call indices ("0", "1", ...)
    // to response texts; indices must be contiguous from 0.
    static std::shared_ptr<MockBackend> from_json_file(const std::string & path);

    std::string name() const override { return "mock"; }
    BackendCapabilities capabilities() const override { return {false, false}; }
    GenerationResult generate(const PromptWithSpans & prompt,
                              const std::vector<RangeWeight> & ranges,
                              int max_new,
                              uint64_t seed) override;

private:
    std::vector<std::string> script_;
    std::mutex mutex_;
    size_t next_ = 0;
};

enum class CalibrationMode {
    Calibrated, // correct answers come with low-entropy step distributions
    Inverted,   // correct answers come with high-entropy step distributions
    Flat,       // entropy independent of correctness
};

// Simulated debate participant for desk-scale consensus experiments. Solves
// the arithmetic question internally, answers correctly with the configured
// probability (wrong answers share a per-problem delta so errors correlate
// across agents), and in later rounds follows the confidence-weighted
// majority of the quoted responses. Range weights are honored by reading the
// text they cover, mimicking attention steering without a real model.
class ScriptedNoisyBackend : public Backend {
public:
    ScriptedNoisyBackend(double accuracy, CalibrationMode calibration, uint64_t seed,
                         double follow_probability = 0.9);

    std::string name() const override { return "noisy"; }
    BackendCapabilities capabilities() const override { return {true, true}; }
    GenerationResult generate(const PromptWithSpans & prompt,
                              const std::vector<RangeWeight> & ranges,
                              int max_new,
                              uint64_t seed) override;

private:
    double accuracy_;
    CalibrationMode calibration_;
    uint64_t seed_;
    double follow_probability_;
};

CalibrationMode calibration_from_name(const std::string & name);
const char * calibration_name(CalibrationMode mode);

} // namespace condebate
