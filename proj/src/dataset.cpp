#include "condebate/dataset.hpp"

#include "condebate/errors.hpp"
#include "condebate/rng.hpp"

#include <json.hpp>

#include <fstream>

namespace condebate {

using nlohmann::json;

namespace {

void check_operand(int x, const char * name) {
    if (x < 0 || x >= kOperandBound) {
        throw NumericDomainError(std::string("operand ") + name + " = " + std::to_string(x) +
                                 " outside [0, " + std::to_string(kOperandBound) + ")");
    }
}

} // namespace

int eval_expr(int a, int b, int c, int d) {
    check_operand(a, "a");
    check_operand(b, "b");
    check_operand(c, "c");
    check_operand(d, "d");
    return a + b * c + d;
}

std::string render_question(int a, int b, int c, int d) {
    return "What is the result of " + std::to_string(a) + "+" + std::to_string(b) + "*" +
           std::to_string(c) + "+" + std::to_string(d) +
           "? State the final answer at the end of your response.";
}

ArithmeticProblem make_problem(int a, int b, int c, int d) {
    ArithmeticProblem p;
    p.a = a;
    p.b = b;
    p.c = c;
    p.d = d;
    p.answer = eval_expr(a, b, c, d);
    p.question = render_question(a, b, c, d);
    return p;
}

std::vector<ArithmeticProblem> generate_problems(int n, uint64_t seed) {
    if (n < 1) {
        throw ConfigError("generate_problems: n must be >= 1, got " + std::to_string(n));
    }
    Pcg32 rng(seed);
    std::vector<ArithmeticProblem> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        int a = static_cast<int>(rng.next_below(kOperandBound));
        int b = static_cast<int>(rng.next_below(kOperandBound));
        int c = static_cast<int>(rng.next_below(kOperandBound));
        int d = static_cast<int>(rng.next_below(kOperandBound));
        out.push_back(make_problem(a, b, c, d));
    }
    return out;
}

void save_problems_jsonl(const std::string & path,
                         const std::vector<ArithmeticProblem> & problems) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("save_problems_jsonl: cannot open " + path);
    }
    for (const auto & p : problems) {
        json j = {{"a", p.a},
                  {"b", p.b},
                  {"c", p.c},
                  {"d", p.d},
                  {"question", p.question},
                  {"answer", p.answer}};
        out << j.dump() << "\n";
    }
}

std::vector<ArithmeticProblem> load_problems_jsonl(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("load_problems_jsonl: cannot open " + path);
    }
    std::vector<ArithmeticProblem> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ConfigError("load_problems_jsonl: invalid JSON at " + path + ":" +
                              std::to_string(line_no));
        }
        ArithmeticProblem p;
        p.a = j.at("a").get<int>();
        p.b = j.at("b").get<int>();
        p.c = j.at("c").get<int>();
        p.d = j.at("d").get<int>();
        p.question = j.at("question").get<std::string>();
        p.answer = j.at("answer").get<int>();
        if (p.answer != eval_expr(p.a, p.b, p.c, p.d)) {
            throw ConfigError("load_problems_jsonl: stored answer disagrees with operands at " +
                              path + ":" + std::to_string(line_no));
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace condebate
