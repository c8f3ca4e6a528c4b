#include "condebate/debate.hpp"

#include "condebate/errors.hpp"
#include "condebate/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <regex>
#include <tuple>

namespace condebate {

using nlohmann::json;

const char * method_name(DebateMethod method) {
    switch (method) {
        case DebateMethod::Standard:   return "standard";
        case DebateMethod::Prompt:     return "prompt";
        case DebateMethod::AttnOthers: return "attn_others";
        case DebateMethod::AttnAll:    return "attn_all";
    }
    return "unknown";
}

DebateMethod method_from_name(const std::string & name) {
    if (name == "standard") {
        return DebateMethod::Standard;
    }
    if (name == "prompt") {
        return DebateMethod::Prompt;
    }
    if (name == "attn_others" || name == "attn-others") {
        return DebateMethod::AttnOthers;
    }
    if (name == "attn_all" || name == "attn-all") {
        return DebateMethod::AttnAll;
    }
    throw ConfigError("unknown debate method: " + name);
}

// ---------------------------------------------------------------------------
// Prompt construction
// ---------------------------------------------------------------------------

namespace {

std::string format_confidence(double w) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", w);
    return buf;
}

} // namespace

PromptWithSpans build_prompt(const std::string & question,
                             const std::vector<AgentResponse> & priors,
                             int self_id,
                             DebateMethod method) {
    PromptWithSpans prompt;
    if (priors.empty()) {
        prompt.text = question;
        return prompt;
    }

    std::vector<const AgentResponse *> ordered;
    ordered.reserve(priors.size());
    for (const auto & p : priors) {
        ordered.push_back(&p);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const AgentResponse * a, const AgentResponse * b) {
                  return a->agent_id < b->agent_id;
              });

    std::string text = question + "\n\nThese are the latest responses from each agent:";
    std::vector<std::pair<int, int>> char_bounds;
    for (const AgentResponse * prior : ordered) {
        text += "\n\n";
        const int start = static_cast<int>(text.size());
        text += "Agent " + std::to_string(prior->agent_id) + " response";
        if (prior->agent_id == self_id) {
            text += " (yours)";
        }
        if (method == DebateMethod::Prompt) {
            text += " (confidence: " + format_confidence(prior->confidence.value) + ")";
        }
        text += ": \"" + prior->text + "\"";
        char_bounds.emplace_back(start, static_cast<int>(text.size()));
    }
    text += "\n\nUsing these responses as additional information, give an updated answer. "
            "State the final answer at the end of your response.";

    auto spans = WordTokenizer::whitespace_spans(text);
    for (size_t b = 0; b < char_bounds.size(); ++b) {
        const auto [cb, ce] = char_bounds[b];
        int tok_start = -1;
        int tok_end = -1;
        for (const auto & s : spans) {
            const bool inside = s.start_char >= cb && s.end_char <= ce;
            if (inside) {
                if (tok_start < 0) {
                    tok_start = s.token_index;
                } else if (s.token_index != tok_end) {
                    throw InternalError("build_prompt: non-contiguous tokens in a block");
                }
                tok_end = s.token_index + 1;
            }
        }
        if (tok_start < 0) {
            throw InternalError("build_prompt: block produced no tokens");
        }
        PromptBlock block;
        block.agent_id = ordered[b]->agent_id;
        block.source_round = ordered[b]->round_index;
        block.token_start = tok_start;
        block.token_end = tok_end;
        block.confidence = ordered[b]->confidence.value;
        block.is_self = ordered[b]->agent_id == self_id;
        block.used_for_attention =
            method == DebateMethod::AttnAll ||
            (method == DebateMethod::AttnOthers && !block.is_self);
        prompt.blocks.push_back(block);
        if (block.used_for_attention) {
            prompt.attention_ranges.push_back(
                {block.token_start, block.token_end, block.confidence});
        }
    }
    prompt.text = std::move(text);
    return prompt;
}

// ---------------------------------------------------------------------------
// Answer extraction
// ---------------------------------------------------------------------------

namespace {

const std::regex & integer_regex() {
    static const std::regex re(R"([+-]?\d{1,3}(?:,\d{3})+|[+-]?\d+)");
    return re;
}

std::string canonical_integer(const std::string & match) {
    std::string digits;
    bool negative = false;
    for (char c : match) {
        if (c == ',' || c == '+') {
            continue;
        }
        if (c == '-') {
            negative = true;
            continue;
        }
        digits.push_back(c);
    }
    const size_t nz = digits.find_first_not_of('0');
    if (nz == std::string::npos) {
        return "0";
    }
    digits = digits.substr(nz);
    return negative ? "-" + digits : digits;
}

} // namespace

std::optional<std::string> extract_answer(const std::string & text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    static const std::string marker = "final answer";
    const size_t pos = lower.rfind(marker);
    if (pos != std::string::npos) {
        const std::string after = text.substr(pos + marker.size());
        std::smatch m;
        if (std::regex_search(after, m, integer_regex())) {
            return canonical_integer(m[0]);
        }
    }
    std::string last;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), integer_regex());
         it != std::sregex_iterator(); ++it) {
        last = (*it)[0];
    }
    if (last.empty()) {
        return std::nullopt;
    }
    return canonical_integer(last);
}

// ---------------------------------------------------------------------------
// Rounds
// ---------------------------------------------------------------------------

void run_round(DebateState & state, int round_index) {
    const DebateConfig & cfg = *state.cfg;
    if (round_index != static_cast<int>(state.rounds.size())) {
        throw InternalError("run_round: rounds must be executed in order");
    }
    const std::vector<AgentResponse> no_priors;
    const auto & priors = round_index == 0 ? no_priors : state.rounds[static_cast<size_t>(round_index - 1)];

    std::vector<AgentResponse> responses;
    responses.reserve(cfg.agents.size());
    for (size_t i = 0; i < cfg.agents.size(); ++i) {
        const AgentSpec & spec = cfg.agents[i];
        const auto caps = spec.backend->capabilities();

        DebateMethod effective = cfg.method;
        if ((effective == DebateMethod::AttnAll || effective == DebateMethod::AttnOthers) &&
            !caps.supports_attention_ranges) {
            // Range-incapable backends get the confidences as text instead,
            // the manually weighted third-party agent's channel.
            effective = DebateMethod::Prompt;
        }

        PromptWithSpans prompt =
            build_prompt(state.question, priors, static_cast<int>(i), effective);
        if (!prompt.attention_ranges.empty() && !caps.supports_attention_ranges) {
            throw InternalError("run_round: ranges routed to a non-capable backend");
        }

        const uint64_t call_seed =
            mix_seed(cfg.seed, static_cast<uint64_t>(round_index) + 1, i + 1);
        GenerationResult gen;
        try {
            gen = spec.backend->generate(prompt, prompt.attention_ranges,
                                         cfg.max_new_tokens, call_seed);
        } catch (const Error & e) {
            throw Error("agent " + std::to_string(i) + " round " +
                        std::to_string(round_index + 1) + " (" + spec.backend->name() +
                        "): " + e.what());
        }

        AgentResponse resp;
        resp.agent_id = static_cast<int>(i);
        resp.round_index = round_index;
        resp.text = gen.text;
        auto answer = extract_answer(gen.text);
        resp.parseable = answer.has_value();
        resp.extracted_answer = answer.value_or("");
        resp.prompt_spans = prompt.blocks;

        try {
            if (spec.fixed_confidence) {
                resp.confidence = fixed_confidence(*spec.fixed_confidence);
                resp.uncertainty = {1.0 / resp.confidence.value, EstimatorKind::Fixed};
            } else {
                switch (cfg.estimator) {
                    case EstimatorKind::MeanEntropy: {
                        if (!gen.step_distributions) {
                            throw ConfigError("backend provides no step distributions for "
                                              "the entropy estimator; set fixed_confidence");
                        }
                        EntropyOptions opts;
                        opts.aggregate_sum = cfg.entropy_sum;
                        resp.uncertainty = mean_token_entropy(*gen.step_distributions, opts);
                        resp.confidence = confidence_from_uncertainty(resp.uncertainty);
                        break;
                    }
                    case EstimatorKind::TokenSAR: {
                        if (!gen.chosen_logprobs) {
                            throw ConfigError("backend provides no token logprobs for the "
                                              "TokenSAR estimator; set fixed_confidence");
                        }
                        const std::vector<double> relevances(gen.chosen_logprobs->size(), 1.0);
                        resp.uncertainty = token_sar(*gen.chosen_logprobs, relevances);
                        resp.confidence = confidence_from_uncertainty(resp.uncertainty);
                        break;
                    }
                    case EstimatorKind::Oracle: {
                        if (!state.ground_truth) {
                            throw ConfigError("the oracle estimator needs a ground truth");
                        }
                        resp.confidence = oracle_confidence(
                            resp.parseable ? resp.extracted_answer : std::string("<none>"),
                            std::to_string(*state.ground_truth), cfg.oracle_w_hi,
                            cfg.oracle_w_lo);
                        resp.uncertainty = {1.0 / resp.confidence.value, EstimatorKind::Oracle};
                        break;
                    }
                    case EstimatorKind::Fixed:
                        throw ConfigError("estimator 'fixed' requires fixed_confidence on "
                                          "every agent");
                }
            }
        } catch (const Error & e) {
            throw Error("agent " + std::to_string(i) + " round " +
                        std::to_string(round_index + 1) + ": " + e.what());
        }
        responses.push_back(std::move(resp));
    }
    state.rounds.push_back(std::move(responses));
}

// ---------------------------------------------------------------------------
// Voting
// ---------------------------------------------------------------------------

VoteDetail majority_vote(const std::vector<AgentResponse> & responses, bool weighted) {
    VoteDetail detail;
    std::map<std::string, VoteCandidate> by_answer;
    for (const auto & r : responses) {
        if (!r.parseable) {
            detail.unparseable_agents.push_back(r.agent_id);
            continue;
        }
        auto & c = by_answer[r.extracted_answer];
        c.answer = r.extracted_answer;
        c.count += 1;
        c.confidence_sum += r.confidence.value;
        c.proposers.push_back(r.agent_id);
    }
    if (by_answer.empty()) {
        throw NoConsensusError("majority_vote: no parseable answers among " +
                               std::to_string(responses.size()) + " responses");
    }
    for (auto & [answer, cand] : by_answer) {
        std::sort(cand.proposers.begin(), cand.proposers.end());
        detail.candidates.push_back(cand);
    }
    std::sort(detail.candidates.begin(), detail.candidates.end(),
              [weighted](const VoteCandidate & a, const VoteCandidate & b) {
                  const auto key = [weighted](const VoteCandidate & c) {
                      const double primary = weighted ? c.confidence_sum
                                                      : static_cast<double>(c.count);
                      const double secondary = weighted ? static_cast<double>(c.count)
                                                        : c.confidence_sum;
                      return std::make_tuple(primary, secondary,
                                             -static_cast<double>(c.proposers.front()));
                  };
                  return key(a) > key(b);
              });
    detail.winner = detail.candidates.front().answer;
    return detail;
}

// ---------------------------------------------------------------------------
// Full debate
// ---------------------------------------------------------------------------

DebateTranscript run_debate(const std::string & question,
                            std::optional<int> ground_truth,
                            const DebateConfig & cfg) {
    if (cfg.agents.size() < 2) {
        throw ConfigError("run_debate: a debate needs at least two agents");
    }
    for (size_t i = 0; i < cfg.agents.size(); ++i) {
        if (!cfg.agents[i].backend) {
            throw ConfigError("run_debate: agent " + std::to_string(i) + " has no backend");
        }
    }
    if (cfg.num_rounds < 1) {
        throw ConfigError("run_debate: num_rounds must be >= 1");
    }
    if (cfg.max_new_tokens < 1) {
        throw ConfigError("run_debate: max_new_tokens must be >= 1");
    }

    DebateState state;
    state.question = question;
    state.ground_truth = ground_truth;
    state.cfg = &cfg;
    for (int r = 0; r < cfg.num_rounds; ++r) {
        run_round(state, r);
    }

    DebateTranscript t;
    t.question = question;
    t.ground_truth = ground_truth;
    t.method = cfg.method;
    t.estimator = cfg.estimator;
    t.seed = cfg.seed;
    t.rounds = std::move(state.rounds);
    t.vote = majority_vote(t.rounds.back(), cfg.weighted_vote);
    t.final_answer = t.vote.winner;
    return t;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json block_to_json(const PromptBlock & b) {
    return json{{"agent_id", b.agent_id},
                {"source_round", b.source_round},
                {"token_start", b.token_start},
                {"token_end", b.token_end},
                {"weight", b.confidence},
                {"is_self", b.is_self},
                {"used_for_attention", b.used_for_attention}};
}

PromptBlock block_from_json(const json & j) {
    PromptBlock b;
    b.agent_id = j.at("agent_id").get<int>();
    b.source_round = j.at("source_round").get<int>();
    b.token_start = j.at("token_start").get<int>();
    b.token_end = j.at("token_end").get<int>();
    b.confidence = j.at("weight").get<double>();
    b.is_self = j.at("is_self").get<bool>();
    b.used_for_attention = j.at("used_for_attention").get<bool>();
    return b;
}

json response_to_json(const AgentResponse & r) {
    json spans = json::array();
    for (const auto & b : r.prompt_spans) {
        spans.push_back(block_to_json(b));
    }
    return json{{"agent_id", r.agent_id},
                {"round_index", r.round_index},
                {"text", r.text},
                {"extracted_answer", r.parseable ? json(r.extracted_answer) : json(nullptr)},
                {"uncertainty",
                 json{{"value", r.uncertainty.value},
                      {"estimator", estimator_name(r.uncertainty.estimator)}}},
                {"confidence", r.confidence.value},
                {"prompt_spans", spans}};
}

AgentResponse response_from_json(const json & j) {
    AgentResponse r;
    r.agent_id = j.at("agent_id").get<int>();
    r.round_index = j.at("round_index").get<int>();
    r.text = j.at("text").get<std::string>();
    if (j.at("extracted_answer").is_null()) {
        r.parseable = false;
    } else {
        r.parseable = true;
        r.extracted_answer = j.at("extracted_answer").get<std::string>();
    }
    r.uncertainty.value = j.at("uncertainty").at("value").get<double>();
    r.uncertainty.estimator =
        estimator_from_name(j.at("uncertainty").at("estimator").get<std::string>());
    r.confidence.value = j.at("confidence").get<double>();
    for (const auto & b : j.at("prompt_spans")) {
        r.prompt_spans.push_back(block_from_json(b));
    }
    return r;
}

} // namespace

json transcript_to_json(const DebateTranscript & t) {
    json rounds = json::array();
    for (const auto & round : t.rounds) {
        json jr = json::array();
        for (const auto & resp : round) {
            jr.push_back(response_to_json(resp));
        }
        rounds.push_back(std::move(jr));
    }
    json candidates = json::array();
    for (const auto & c : t.vote.candidates) {
        candidates.push_back(json{{"answer", c.answer},
                                  {"count", c.count},
                                  {"confidence_sum", c.confidence_sum},
                                  {"proposers", c.proposers}});
    }
    return json{{"schema_version", t.schema_version},
                {"question", t.question},
                {"ground_truth", t.ground_truth ? json(*t.ground_truth) : json(nullptr)},
                {"method", method_name(t.method)},
                {"estimator", estimator_name(t.estimator)},
                {"seed", t.seed},
                {"rounds", rounds},
                {"final_answer", t.final_answer},
                {"vote", json{{"winner", t.vote.winner},
                              {"candidates", candidates},
                              {"unparseable_agents", t.vote.unparseable_agents}}}};
}

DebateTranscript transcript_from_json(const json & j) {
    DebateTranscript t;
    t.schema_version = j.at("schema_version").get<int>();
    t.question = j.at("question").get<std::string>();
    if (!j.at("ground_truth").is_null()) {
        t.ground_truth = j.at("ground_truth").get<int>();
    }
    t.method = method_from_name(j.at("method").get<std::string>());
    t.estimator = estimator_from_name(j.at("estimator").get<std::string>());
    t.seed = j.at("seed").get<uint64_t>();
    for (const auto & jr : j.at("rounds")) {
        std::vector<AgentResponse> round;
        for (const auto & resp : jr) {
            round.push_back(response_from_json(resp));
        }
        t.rounds.push_back(std::move(round));
    }
    t.final_answer = j.at("final_answer").get<std::string>();
    const auto & v = j.at("vote");
    t.vote.winner = v.at("winner").get<std::string>();
    for (const auto & jc : v.at("candidates")) {
        VoteCandidate c;
        c.answer = jc.at("answer").get<std::string>();
        c.count = jc.at("count").get<int>();
        c.confidence_sum = jc.at("confidence_sum").get<double>();
        c.proposers = jc.at("proposers").get<std::vector<int>>();
        t.vote.candidates.push_back(std::move(c));
    }
    t.vote.unparseable_agents = v.at("unparseable_agents").get<std::vector<int>>();
    return t;
}

} // namespace condebate
