#pragma once

#include "condebate/backend.hpp"

#include <string>

namespace condebate {

struct HttpBackendConfig {
    std::string base_url;    // scheme://host[:port]
    std::string model_name;
    std::string api_key_env; // env var holding the bearer key; empty = no auth header
    double timeout_seconds = 30.0;
    int max_retries = 3;
    bool logprobs_requested = false;
    int backoff_base_ms = 250; // doubled per attempt, jittered
};

// Chat-completions client for external services (the third-party agent's
// transport). One round-trip per call; retries with jittered exponential
// backoff on connection errors, 429 and 5xx. Server-side attention access
// does not exist, so this backend never accepts ranges; in attention-scaled
// debates it participates through the Prompt method or a fixed confidence.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);

    std::string name() const override { return "http"; }
    BackendCapabilities capabilities() const override {
        return {false, cfg_.logprobs_requested};
    }
    GenerationResult generate(const PromptWithSpans & prompt,
                              const std::vector<RangeWeight> & ranges,
                              int max_new,
                              uint64_t seed) override;

private:
    HttpBackendConfig cfg_;
};

} // namespace condebate
