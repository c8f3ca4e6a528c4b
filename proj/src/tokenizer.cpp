#include "condebate/tokenizer.hpp"

#include "condebate/errors.hpp"

#include <cctype>
#include <unordered_map>

namespace condebate {

namespace {

const char * const kBaseWords[] = {
    "what",      "is",       "the",     "result",     "of",     "state",  "final",
    "answer",    "at",       "end",     "your",       "response", "these", "are",
    "latest",    "responses", "from",   "all",        "agents", "agent",  "yours",
    "confidence", "using",   "as",      "additional", "information", "give", "an",
    "updated",   "computing", "step",   "by",         "then",   "adding", "and",
};

std::string normalize(const std::string & chunk) {
    size_t b = 0;
    size_t e = chunk.size();
    while (b < e && !std::isalnum(static_cast<unsigned char>(chunk[b]))) {
        ++b;
    }
    while (e > b && !std::isalnum(static_cast<unsigned char>(chunk[e - 1]))) {
        --e;
    }
    std::string out;
    out.reserve(e - b);
    for (size_t i = b; i < e; ++i) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(chunk[i]))));
    }
    return out;
}

} // namespace

WordTokenizer::WordTokenizer(int vocab_size) {
    if (vocab_size < 2) {
        throw ConfigError("WordTokenizer: vocab_size must be >= 2, got " +
                          std::to_string(vocab_size));
    }
    words_.reserve(static_cast<size_t>(vocab_size));
    words_.push_back("<unk>");
    const size_t n_base = sizeof(kBaseWords) / sizeof(kBaseWords[0]);
    for (size_t i = 0; i < n_base && words_.size() < static_cast<size_t>(vocab_size); ++i) {
        words_.push_back(kBaseWords[i]);
    }
    int number = 0;
    while (words_.size() < static_cast<size_t>(vocab_size)) {
        words_.push_back(std::to_string(number++));
    }
    for (size_t id = 1; id < words_.size(); ++id) {
        lookup_.emplace(words_[id], static_cast<int>(id));
    }
}

std::vector<TokenSpan> WordTokenizer::whitespace_spans(const std::string & text) {
    std::vector<TokenSpan> spans;
    int i = 0;
    const int n = static_cast<int>(text.size());
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[static_cast<size_t>(i)]))) {
            ++i;
        }
        if (i >= n) {
            break;
        }
        int start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[static_cast<size_t>(i)]))) {
            ++i;
        }
        spans.push_back({start, i, static_cast<int>(spans.size())});
    }
    return spans;
}

Tokenized WordTokenizer::tokenize(const std::string & text) const {
    Tokenized out;
    out.spans = whitespace_spans(text);
    out.ids.reserve(out.spans.size());
    for (const auto & span : out.spans) {
        std::string word = normalize(text.substr(static_cast<size_t>(span.start_char),
                                                 static_cast<size_t>(span.end_char - span.start_char)));
        auto it = lookup_.find(word);
        out.ids.push_back(it == lookup_.end() ? oov_id() : it->second);
    }
    return out;
}

std::string WordTokenizer::decode(const std::vector<int> & ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= vocab_size()) {
            throw InternalError("WordTokenizer::decode: id " + std::to_string(ids[i]) +
                                " outside vocabulary of " + std::to_string(vocab_size()));
        }
        if (i > 0) {
            out.push_back(' ');
        }
        out += words_[static_cast<size_t>(ids[i])];
    }
    return out;
}

} // namespace condebate
