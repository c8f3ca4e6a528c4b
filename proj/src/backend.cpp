#include "condebate/backend.hpp"

#include "condebate/debate.hpp"
#include "condebate/errors.hpp"
#include "condebate/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>

namespace condebate {

using nlohmann::json;

void Backend::require_range_support(const std::vector<RangeWeight> & ranges) const {
    if (!ranges.empty() && !capabilities().supports_attention_ranges) {
        throw UnsupportedFeatureError(name() + " backend cannot apply attention ranges");
    }
}

// ---------------------------------------------------------------------------
// ToyDecoderBackend
// ---------------------------------------------------------------------------

GenerateOptions ToyDecoderBackend::default_options() {
    GenerateOptions opts;
    opts.sample = true;
    opts.temperature = 1.0;
    return opts;
}

ToyDecoderBackend::ToyDecoderBackend(const DecoderConfig & cfg, GenerateOptions opts)
    : decoder_(cfg), tokenizer_(cfg.vocab_size), opts_(opts) {}

GenerationResult ToyDecoderBackend::generate(const PromptWithSpans & prompt,
                                             const std::vector<RangeWeight> & ranges,
                                             int max_new,
                                             uint64_t seed) {
    require_range_support(ranges);
    Tokenized tok = tokenizer_.tokenize(prompt.text);
    auto steps = decoder_.generate(tok.ids, ranges, max_new, seed, opts_);

    std::vector<int> ids;
    ids.reserve(steps.size());
    GenerationResult result;
    result.chosen_logprobs.emplace();
    result.step_distributions.emplace();
    for (const auto & step : steps) {
        ids.push_back(step.token_id);
        result.chosen_logprobs->push_back(step.logprob_chosen);
        // Normalized per-step distribution from the raw logits.
        double m = -HUGE_VAL;
        for (double x : step.logits) {
            m = std::max(m, x);
        }
        std::vector<double> p(step.logits.size());
        double den = 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
            p[i] = std::exp(step.logits[i] - m);
            den += p[i];
        }
        for (auto & x : p) {
            x /= den;
        }
        result.step_distributions->push_back(std::move(p));
    }
    result.text = tokenizer_.decode(ids);
    result.token_spans = WordTokenizer::whitespace_spans(result.text);
    return result;
}

// ---------------------------------------------------------------------------
// MockBackend
// ---------------------------------------------------------------------------

MockBackend::MockBackend(std::vector<std::string> script) : script_(std::move(script)) {
    if (script_.empty()) {
        throw ConfigError("MockBackend: script must contain at least one response");
    }
}

std::shared_ptr<MockBackend> MockBackend::from_json_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("MockBackend: cannot open fixture " + path);
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("MockBackend: fixture " + path +
                          " must be a JSON object mapping call indices to texts");
    }
    std::vector<std::string> script(j.size());
    for (const auto & [key, value] : j.items()) {
        size_t idx = 0;
        try {
            idx = std::stoul(key);
        } catch (const std::exception &) {
            throw ConfigError("MockBackend: non-numeric call index '" + key + "' in " + path);
        }
        if (idx >= script.size()) {
            throw ConfigError("MockBackend: call indices in " + path +
                              " must be contiguous from 0");
        }
        script[idx] = value.get<std::string>();
    }
    return std::make_shared<MockBackend>(std::move(script));
}

GenerationResult MockBackend::generate(const PromptWithSpans & prompt,
                                       const std::vector<RangeWeight> & ranges,
                                       int max_new,
                                       uint64_t seed) {
    (void)prompt;
    (void)max_new;
    (void)seed;
    require_range_support(ranges);
    size_t idx;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        idx = std::min(next_, script_.size() - 1);
        ++next_;
    }
    GenerationResult result;
    result.text = script_[idx];
    result.token_spans = WordTokenizer::whitespace_spans(result.text);
    return result;
}

// ---------------------------------------------------------------------------
// ScriptedNoisyBackend
// ---------------------------------------------------------------------------

namespace {

struct ParsedQuestion {
    int a, b, c, d;
    long long truth;
};

ParsedQuestion parse_question(const std::string & text) {
    static const std::regex re(R"(What is the result of (\d+)\+(\d+)\*(\d+)\+(\d+)\?)");
    std::smatch m;
    if (!std::regex_search(text, m, re)) {
        throw ConfigError("ScriptedNoisyBackend: prompt does not contain an arithmetic "
                          "question it can solve");
    }
    ParsedQuestion q{};
    q.a = std::stoi(m[1]);
    q.b = std::stoi(m[2]);
    q.c = std::stoi(m[3]);
    q.d = std::stoi(m[4]);
    q.truth = static_cast<long long>(q.a) + static_cast<long long>(q.b) * q.c + q.d;
    return q;
}

// Wrong answers share a per-problem offset so simulated errors correlate
// across agents, the way one model family tends to fail the same way.
long long wrong_answer(const ParsedQuestion & q) {
    uint64_t key = ((static_cast<uint64_t>(q.a) * 30 + q.b) * 30 + q.c) * 30 + q.d;
    uint64_t h = mix_seed(0x57524f4e47ULL, key);
    long long delta = 1 + static_cast<long long>(h % 12);
    if ((h >> 8) & 1) {
        delta = -delta;
    }
    long long wrong = q.truth + delta;
    if (wrong < 0) {
        wrong = q.truth + (-delta);
    }
    return wrong;
}

struct PeerInfo {
    std::string answer;
    double weight = 1.0;
    bool is_self = false;
};

// Peer candidates from the attention ranges: read the text each range covers.
std::vector<PeerInfo> peers_from_ranges(const PromptWithSpans & prompt,
                                        const std::vector<RangeWeight> & ranges) {
    std::vector<PeerInfo> peers;
    auto spans = WordTokenizer::whitespace_spans(prompt.text);
    for (const auto & r : ranges) {
        if (r.start < 0 || r.end > static_cast<int>(spans.size()) || r.start >= r.end) {
            throw RangeValidationError("ScriptedNoisyBackend: range outside prompt tokens");
        }
        const int begin = spans[static_cast<size_t>(r.start)].start_char;
        const int end = spans[static_cast<size_t>(r.end - 1)].end_char;
        std::string covered = prompt.text.substr(static_cast<size_t>(begin),
                                                 static_cast<size_t>(end - begin));
        auto answer = extract_answer(covered);
        if (!answer) {
            continue;
        }
        PeerInfo info;
        info.answer = *answer;
        info.weight = r.weight;
        info.is_self = covered.find("(yours)") != std::string::npos;
        peers.push_back(std::move(info));
    }
    return peers;
}

// Peer candidates from the prompt text alone (Standard / Prompt methods).
std::vector<PeerInfo> peers_from_text(const std::string & text) {
    static const std::regex block_re(
        "Agent (\\d+) response((?: \\(yours\\))?(?: \\(confidence: "
        "[0-9]+(?:\\.[0-9]+)?\\))?): \"([^\"]*)\"");
    static const std::regex conf_re(R"(confidence: ([0-9]+(?:\.[0-9]+)?))");
    std::vector<PeerInfo> peers;
    auto begin = std::sregex_iterator(text.begin(), text.end(), block_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const std::smatch & m = *it;
        std::string label_suffix = m[2];
        std::string quoted = m[3];
        auto answer = extract_answer(quoted);
        if (!answer) {
            continue;
        }
        PeerInfo info;
        info.answer = *answer;
        info.is_self = label_suffix.find("(yours)") != std::string::npos;
        std::smatch cm;
        if (std::regex_search(label_suffix, cm, conf_re)) {
            info.weight = std::stod(cm[1]);
        }
        peers.push_back(std::move(info));
    }
    return peers;
}

} // namespace

ScriptedNoisyBackend::ScriptedNoisyBackend(double accuracy, CalibrationMode calibration,
                                           uint64_t seed, double follow_probability)
    : accuracy_(accuracy), calibration_(calibration), seed_(seed),
      follow_probability_(follow_probability) {
    if (accuracy < 0.0 || accuracy > 1.0) {
        throw ConfigError("ScriptedNoisyBackend: accuracy must lie in [0, 1]");
    }
    if (follow_probability < 0.0 || follow_probability > 1.0) {
        throw ConfigError("ScriptedNoisyBackend: follow probability must lie in [0, 1]");
    }
}

GenerationResult ScriptedNoisyBackend::generate(const PromptWithSpans & prompt,
                                                const std::vector<RangeWeight> & ranges,
                                                int max_new,
                                                uint64_t seed) {
    (void)max_new; // the simulated response template has a fixed length
    const ParsedQuestion q = parse_question(prompt.text);
    Pcg32 rng(mix_seed(seed_, seed), 0x6e6f6973ULL);

    std::vector<PeerInfo> peers =
        !ranges.empty() ? peers_from_ranges(prompt, ranges) : peers_from_text(prompt.text);
    if (!ranges.empty()) {
        // Attention steering biases toward the covered blocks; the agent's own
        // uncovered block (AttnOthers) still reaches it as plain text.
        auto text_peers = peers_from_text(prompt.text);
        for (auto & p : text_peers) {
            if (p.is_self) {
                bool covered = false;
                for (const auto & rp : peers) {
                    if (rp.is_self) {
                        covered = true;
                    }
                }
                if (!covered) {
                    peers.push_back(p);
                }
            }
        }
    }

    auto independent_draw = [&]() -> long long {
        return rng.next_bernoulli(accuracy_) ? q.truth : wrong_answer(q);
    };

    long long emitted;
    if (peers.empty()) {
        emitted = independent_draw();
    } else {
        std::map<std::string, double> tally;
        std::string own_answer;
        for (const auto & p : peers) {
            tally[p.answer] += p.weight;
            if (p.is_self) {
                own_answer = p.answer;
            }
        }
        double best = -1.0;
        for (const auto & [answer, w] : tally) {
            best = std::max(best, w);
        }
        std::vector<std::string> winners;
        for (const auto & [answer, w] : tally) {
            if (w == best) {
                winners.push_back(answer);
            }
        }
        std::string winner;
        if (winners.size() == 1) {
            winner = winners.front();
        } else if (!own_answer.empty() &&
                   std::find(winners.begin(), winners.end(), own_answer) != winners.end()) {
            winner = own_answer; // sticks with its own answer on a tie
        } else {
            winner = *std::min_element(winners.begin(), winners.end(),
                                       [](const std::string & x, const std::string & y) {
                                           return std::stoll(x) < std::stoll(y);
                                       });
        }
        emitted = rng.next_bernoulli(follow_probability_) ? std::stoll(winner)
                                                          : independent_draw();
    }

    GenerationResult result;
    result.text = "Computing " + std::to_string(q.a) + "+" + std::to_string(q.b) + "*" +
                  std::to_string(q.c) + "+" + std::to_string(q.d) +
                  " step by step: " + std::to_string(q.b) + "*" + std::to_string(q.c) +
                  " is " + std::to_string(static_cast<long long>(q.b) * q.c) +
                  " then adding " + std::to_string(q.a) + " and " + std::to_string(q.d) +
                  ". The final answer is " + std::to_string(emitted) + ".";
    result.token_spans = WordTokenizer::whitespace_spans(result.text);

    const bool correct = emitted == q.truth;
    double chosen_p = 0.6; // Flat
    if (calibration_ == CalibrationMode::Calibrated) {
        chosen_p = correct ? 0.95 : 0.2;
    } else if (calibration_ == CalibrationMode::Inverted) {
        chosen_p = correct ? 0.2 : 0.95;
    }
    const int sim_vocab = 16;
    const size_t n_steps = result.token_spans.size();
    result.chosen_logprobs.emplace();
    result.step_distributions.emplace();
    for (size_t s = 0; s < n_steps; ++s) {
        std::vector<double> dist(static_cast<size_t>(sim_vocab),
                                 (1.0 - chosen_p) / (sim_vocab - 1));
        dist[(s * 7 + 3) % sim_vocab] = chosen_p;
        result.step_distributions->push_back(std::move(dist));
        result.chosen_logprobs->push_back(std::log(chosen_p));
    }
    return result;
}

CalibrationMode calibration_from_name(const std::string & name) {
    if (name == "calibrated") {
        return CalibrationMode::Calibrated;
    }
    if (name == "inverted") {
        return CalibrationMode::Inverted;
    }
    if (name == "flat") {
        return CalibrationMode::Flat;
    }
    throw ConfigError("unknown calibration mode: " + name);
}

const char * calibration_name(CalibrationMode mode) {
    switch (mode) {
        case CalibrationMode::Calibrated: return "calibrated";
        case CalibrationMode::Inverted:   return "inverted";
        case CalibrationMode::Flat:       return "flat";
    }
    return "unknown";
}

} // namespace condebate
