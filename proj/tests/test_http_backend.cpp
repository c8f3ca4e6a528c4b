#include "condebate/http_backend.hpp"

#include "condebate/debate.hpp"
#include "condebate/errors.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace condebate;
using nlohmann::json;

namespace {

// Local chat-completions stub. fail_first controls how many requests get a
// 503 before the first success; status_override forces a fixed status.
class StubServer {
public:
    explicit StubServer(int fail_first = 0, int status_override = 0)
        : fail_first_(fail_first), status_override_(status_override) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request & req,
                                                    httplib::Response & res) {
            ++calls_;
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            if (status_override_ != 0) {
                res.status = status_override_;
                res.set_content("{}", "application/json");
                return;
            }
            if (calls_ <= fail_first_) {
                res.status = 503;
                res.set_content("{}", "application/json");
                return;
            }
            json reply = {
                {"choices",
                 json::array(
                     {json{{"message", json{{"role", "assistant"},
                                            {"content", "The final answer is 91."}}},
                           {"logprobs",
                            json{{"content",
                                  json::array({json{{"logprob", -0.1}},
                                               json{{"logprob", -0.25}}})}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this]() { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    int calls() const { return calls_; }
    std::string last_auth() const { return last_auth_; }
    std::string last_body() const { return last_body_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> calls_{0};
    int fail_first_;
    int status_override_;
    std::string last_auth_;
    std::string last_body_;
};

HttpBackendConfig fast_config(const std::string & url) {
    HttpBackendConfig cfg;
    cfg.base_url = url;
    cfg.model_name = "stub-model";
    cfg.api_key_env = "CONDEBATE_TEST_KEY";
    cfg.timeout_seconds = 5.0;
    cfg.max_retries = 3;
    cfg.backoff_base_ms = 1;
    cfg.logprobs_requested = true;
    return cfg;
}

PromptWithSpans bare_prompt(const std::string & text) {
    PromptWithSpans p;
    p.text = text;
    return p;
}

} // namespace

TEST_SUITE("http_backend") {

TEST_CASE("happy path maps text and provider logprobs") {
    setenv("CONDEBATE_TEST_KEY", "sekrit", 1);
    StubServer server;
    HttpBackend backend(fast_config(server.url()));
    CHECK(!backend.capabilities().supports_attention_ranges);
    CHECK(backend.capabilities().supports_logprobs);

    auto r = backend.generate(bare_prompt("What is 2+2?"), {}, 16, 42);
    CHECK(r.text == "The final answer is 91.");
    REQUIRE(r.chosen_logprobs.has_value());
    REQUIRE(r.chosen_logprobs->size() == 2);
    CHECK((*r.chosen_logprobs)[0] == -0.1);
    CHECK((*r.chosen_logprobs)[1] == -0.25);
    CHECK(server.last_auth() == "Bearer sekrit");

    auto body = json::parse(server.last_body());
    CHECK(body["model"] == "stub-model");
    CHECK(body["messages"][0]["content"] == "What is 2+2?");
    CHECK(body["max_tokens"] == 16);
    CHECK(body["logprobs"] == true);
}

TEST_CASE("retries transient failures with backoff then succeeds") {
    setenv("CONDEBATE_TEST_KEY", "sekrit", 1);
    StubServer server(/*fail_first=*/2);
    HttpBackend backend(fast_config(server.url()));
    auto r = backend.generate(bare_prompt("q"), {}, 8, 1);
    CHECK(r.text == "The final answer is 91.");
    CHECK(server.calls() == 3);
}

TEST_CASE("gives up after max_retries and reports the status") {
    setenv("CONDEBATE_TEST_KEY", "sekrit", 1);
    StubServer server(/*fail_first=*/100);
    auto cfg = fast_config(server.url());
    cfg.max_retries = 2;
    HttpBackend backend(cfg);
    try {
        backend.generate(bare_prompt("q"), {}, 8, 1);
        FAIL("expected TransportError");
    } catch (const TransportError & e) {
        CHECK(e.status == 503);
    }
    CHECK(server.calls() == 3);
}

TEST_CASE("non-retryable client errors fail immediately") {
    setenv("CONDEBATE_TEST_KEY", "sekrit", 1);
    StubServer server(0, /*status_override=*/400);
    HttpBackend backend(fast_config(server.url()));
    try {
        backend.generate(bare_prompt("q"), {}, 8, 1);
        FAIL("expected TransportError");
    } catch (const TransportError & e) {
        CHECK(e.status == 400);
    }
    CHECK(server.calls() == 1);
}

TEST_CASE("missing API key environment variable is a configuration error") {
    StubServer server;
    auto cfg = fast_config(server.url());
    cfg.api_key_env = "CONDEBATE_TEST_KEY_DOES_NOT_EXIST";
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.generate(bare_prompt("q"), {}, 8, 1), ConfigError);
    CHECK(server.calls() == 0);
}

TEST_CASE("ranges are refused") {
    StubServer server;
    auto cfg = fast_config(server.url());
    cfg.api_key_env.clear();
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.generate(bare_prompt("q"), {{0, 1, 2.0}}, 8, 1),
                    UnsupportedFeatureError);
}

TEST_CASE("empty api_key_env sends no Authorization header") {
    StubServer server;
    auto cfg = fast_config(server.url());
    cfg.api_key_env.clear();
    HttpBackend backend(cfg);
    auto r = backend.generate(bare_prompt("q"), {}, 8, 1);
    CHECK(r.text == "The final answer is 91.");
    CHECK(server.last_auth().empty());
}

TEST_CASE("http agent joins an attention debate through the Prompt fallback") {
    setenv("CONDEBATE_TEST_KEY", "sekrit", 1);
    StubServer server;
    auto http_cfg = fast_config(server.url());
    http_cfg.logprobs_requested = false;

    DebateConfig cfg;
    cfg.num_rounds = 2;
    cfg.method = DebateMethod::AttnAll;
    cfg.estimator = EstimatorKind::Oracle;
    cfg.seed = 10;
    cfg.agents.push_back(
        {std::make_shared<ScriptedNoisyBackend>(0.9, CalibrationMode::Calibrated, 1),
         std::nullopt});
    cfg.agents.push_back({std::make_shared<HttpBackend>(http_cfg), 10.0});

    auto t = run_debate(
        "What is the result of 3+27*3+7? State the final answer at the end of your response.",
        91, cfg);
    CHECK(t.final_answer == "91");
    // The range-capable agent used attention spans in round 2...
    bool noisy_used_ranges = false;
    for (const auto & block : t.rounds[1][0].prompt_spans) {
        noisy_used_ranges = noisy_used_ranges || block.used_for_attention;
    }
    CHECK(noisy_used_ranges);
    // ...while the HTTP agent fell back to the Prompt method (no ranges).
    for (const auto & block : t.rounds[1][1].prompt_spans) {
        CHECK(!block.used_for_attention);
    }
}

} // TEST_SUITE
