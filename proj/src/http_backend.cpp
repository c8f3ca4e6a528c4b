#include "condebate/http_backend.hpp"

#include "condebate/errors.hpp"
#include "condebate/rng.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace condebate {

using nlohmann::json;

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) {
        throw ConfigError("HttpBackend: base_url is required");
    }
    if (!(cfg_.timeout_seconds > 0.0)) {
        throw ConfigError("HttpBackend: timeout must be positive");
    }
    if (cfg_.max_retries < 0) {
        throw ConfigError("HttpBackend: max_retries must be >= 0");
    }
}

GenerationResult HttpBackend::generate(const PromptWithSpans & prompt,
                                       const std::vector<RangeWeight> & ranges,
                                       int max_new,
                                       uint64_t seed) {
    require_range_support(ranges);

    std::string api_key;
    if (!cfg_.api_key_env.empty()) {
        const char * key = std::getenv(cfg_.api_key_env.c_str());
        if (key == nullptr || key[0] == '\0') {
            throw ConfigError("HttpBackend: environment variable " + cfg_.api_key_env +
                              " is not set");
        }
        api_key = key;
    }

    json body = {{"model", cfg_.model_name},
                 {"messages", json::array({json{{"role", "user"}, {"content", prompt.text}}})},
                 {"max_tokens", max_new},
                 {"temperature", 0.0},
                 {"seed", seed}};
    if (cfg_.logprobs_requested) {
        body["logprobs"] = true;
    }
    const std::string payload = body.dump();

    httplib::Client client(cfg_.base_url);
    const auto timeout = std::chrono::milliseconds(
        static_cast<int64_t>(cfg_.timeout_seconds * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key);
    }

    Pcg32 jitter_rng(seed, 0x6a697474ULL);
    int last_status = 0;
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            const int base = cfg_.backoff_base_ms;
            const int delay = base * (1 << (attempt - 1)) +
                              static_cast<int>(jitter_rng.next_below(
                                  static_cast<uint32_t>(std::max(base, 1))));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_status = 0;
            last_error = httplib::to_string(res.error());
            continue;
        }
        last_status = res->status;
        if (res->status == 429 || res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw TransportError("HttpBackend: request failed with status " +
                                     std::to_string(res->status),
                                 res->status);
        }

        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
            throw TransportError("HttpBackend: malformed completion response", res->status);
        }
        const json & choice = reply["choices"][0];
        GenerationResult result;
        result.text = choice.at("message").at("content").get<std::string>();
        result.token_spans = WordTokenizer::whitespace_spans(result.text);
        if (cfg_.logprobs_requested && choice.contains("logprobs") &&
            !choice["logprobs"].is_null()) {
            std::vector<double> lps;
            for (const auto & tok : choice["logprobs"].at("content")) {
                lps.push_back(tok.at("logprob").get<double>());
            }
            result.chosen_logprobs = std::move(lps);
        }
        return result;
    }
    throw TransportError("HttpBackend: request failed after " +
                             std::to_string(cfg_.max_retries + 1) + " attempts (" +
                             last_error + ")",
                         last_status);
}

} // namespace condebate
