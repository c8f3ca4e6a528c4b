#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace condebate {

// Character span of one token within a text, [start_char, end_char).
struct TokenSpan {
    int start_char = 0;
    int end_char = 0;
    int token_index = 0;
};

struct Tokenized {
    std::vector<int> ids;
    std::vector<TokenSpan> spans;
};

// Whitespace word tokenizer over a fixed small vocabulary with an
// out-of-vocabulary bucket at id 0. The word list leads with the prompt
// vocabulary and fills the remaining ids with integer literals so an
// untrained decoder can still emit parseable numbers.
class WordTokenizer {
public:
    explicit WordTokenizer(int vocab_size = 64);

    Tokenized tokenize(const std::string & text) const;
    std::string decode(const std::vector<int> & ids) const;

    int vocab_size() const { return static_cast<int>(words_.size()); }
    int oov_id() const { return 0; }

    // Spans of whitespace-delimited chunks; independent of any vocabulary.
    static std::vector<TokenSpan> whitespace_spans(const std::string & text);

private:
    std::vector<std::string> words_; // id -> word, [0] is the OOV marker
    std::unordered_map<std::string, int> lookup_;
};

} // namespace condebate
