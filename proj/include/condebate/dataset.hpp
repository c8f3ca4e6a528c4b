#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace condebate {

// One a + b*c + d problem with its rendered question and integer answer.
struct ArithmeticProblem {
    int a = 0;
    int b = 0;
    int c = 0;
    int d = 0;
    std::string question;
    int answer = 0;
};

inline constexpr int kOperandBound = 30;

// a + b*c + d with standard precedence; operands must lie in [0, 30).
int eval_expr(int a, int b, int c, int d);

std::string render_question(int a, int b, int c, int d);

ArithmeticProblem make_problem(int a, int b, int c, int d);

// n problems with operands i.i.d. uniform over [0, 30), deterministic per seed.
std::vector<ArithmeticProblem> generate_problems(int n, uint64_t seed);

// JSONL with fields a, b, c, d, question, answer; one problem per line.
void save_problems_jsonl(const std::string & path,
                         const std::vector<ArithmeticProblem> & problems);
std::vector<ArithmeticProblem> load_problems_jsonl(const std::string & path);

} // namespace condebate
