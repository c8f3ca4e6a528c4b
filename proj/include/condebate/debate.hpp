#pragma once

#include "condebate/attn_kernel.hpp"
#include "condebate/backend.hpp"
#include "condebate/uncertainty.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace condebate {

enum class DebateMethod {
    Standard,   // peer responses as plain text
    Prompt,     // peer responses plus numeric confidences in the text
    AttnOthers, // attention ranges over every peer block except one's own
    AttnAll,    // attention ranges over every block including one's own
};

const char * method_name(DebateMethod method);
DebateMethod method_from_name(const std::string & name);

struct AgentSpec {
    std::shared_ptr<Backend> backend;
    // Manual weight for backends without token probabilities (the third-party
    // agent's channel). When set, it overrides the estimator for this agent.
    std::optional<double> fixed_confidence;
};

struct DebateConfig {
    int num_rounds = 3;
    DebateMethod method = DebateMethod::Standard;
    EstimatorKind estimator = EstimatorKind::MeanEntropy;
    std::vector<AgentSpec> agents;
    RangeScalingConfig scaling;
    uint64_t seed = 0;
    int max_new_tokens = 24;
    bool entropy_sum = false;   // sum-over-steps entropy aggregation
    bool weighted_vote = false; // plurality over confidence sums instead of counts
    double oracle_w_hi = 10.0;
    double oracle_w_lo = 1.0;
};

struct AgentResponse {
    int agent_id = -1;
    int round_index = -1; // 0-based
    std::string text;
    std::string extracted_answer; // canonical integer; empty when unparseable
    bool parseable = false;
    UncertaintyScore uncertainty;
    ConfidenceWeight confidence;
    std::vector<PromptBlock> prompt_spans; // provenance of the prompt this was generated from
};

struct VoteCandidate {
    std::string answer;
    int count = 0;
    double confidence_sum = 0.0;
    std::vector<int> proposers;
};

struct VoteDetail {
    std::string winner;
    std::vector<VoteCandidate> candidates; // sorted by the winning order
    std::vector<int> unparseable_agents;
};

struct DebateTranscript {
    int schema_version = 1;
    std::string question;
    std::optional<int> ground_truth;
    DebateMethod method = DebateMethod::Standard;
    EstimatorKind estimator = EstimatorKind::MeanEntropy;
    uint64_t seed = 0;
    std::vector<std::vector<AgentResponse>> rounds;
    std::string final_answer;
    VoteDetail vote;
};

// Deterministic prompt template. Round 1 (empty priors) is the bare question;
// later rounds quote every prior agent's response in agent-id order with
// token-span bookkeeping. Prompt method embeds "confidence: {w:.2f}" in each
// block label; Attn methods emit RangeWeights whose weights are the quoted
// agents' confidences (AttnOthers omits the requesting agent's own block).
PromptWithSpans build_prompt(const std::string & question,
                             const std::vector<AgentResponse> & priors,
                             int self_id,
                             DebateMethod method);

// Canonical integer answer extraction: the first integer after the last
// (case-insensitive) "final answer" marker, falling back to the last integer
// anywhere; thousands separators tolerated, leading zeros stripped.
std::optional<std::string> extract_answer(const std::string & text);

struct DebateState {
    std::string question;
    std::optional<int> ground_truth;
    const DebateConfig * cfg = nullptr;
    std::vector<std::vector<AgentResponse>> rounds;
};

// Runs one synchronized round: every agent generates against prompts built
// solely from the previous round's responses. Appends to state.rounds.
void run_round(DebateState & state, int round_index);

// Plurality over canonical answers; ties broken by summed confidence, then
// lowest proposing agent id. Unparseable answers are excluded from counting
// but recorded. Throws NoConsensusError when nothing parses.
VoteDetail majority_vote(const std::vector<AgentResponse> & responses,
                         bool weighted = false);

DebateTranscript run_debate(const std::string & question,
                            std::optional<int> ground_truth,
                            const DebateConfig & cfg);

nlohmann::json transcript_to_json(const DebateTranscript & t);
DebateTranscript transcript_from_json(const nlohmann::json & j);

} // namespace condebate
