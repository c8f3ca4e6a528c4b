#include "condebate/uncertainty.hpp"

#include "condebate/errors.hpp"

#include <algorithm>
#include <cmath>

namespace condebate {

UncertaintyScore mean_token_entropy(const std::vector<std::vector<double>> & steps,
                                    const EntropyOptions & opts) {
    if (steps.empty()) {
        throw EmptyInputError("mean_token_entropy: no steps given");
    }
    double acc = 0.0;
    for (size_t s = 0; s < steps.size(); ++s) {
        const auto & p = steps[s];
        double sum = 0.0;
        double h = 0.0;
        for (double x : p) {
            if (!(x >= 0.0) || !std::isfinite(x)) {
                throw NumericDomainError("mean_token_entropy: step " + std::to_string(s) +
                                         " has a negative or non-finite probability");
            }
            sum += x;
            if (x > 0.0) {
                h -= x * std::log(x);
            }
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw NumericDomainError("mean_token_entropy: step " + std::to_string(s) +
                                     " sums to " + std::to_string(sum));
        }
        acc += h;
    }
    double value = opts.aggregate_sum ? acc : acc / static_cast<double>(steps.size());
    return {std::max(value, kUncertaintyFloor), EstimatorKind::MeanEntropy};
}

UncertaintyScore token_sar(const std::vector<double> & chosen_logprobs,
                           const std::vector<double> & relevances) {
    if (chosen_logprobs.empty()) {
        throw EmptyInputError("token_sar: no tokens given");
    }
    if (chosen_logprobs.size() != relevances.size()) {
        throw DimensionError("token_sar: " + std::to_string(chosen_logprobs.size()) +
                             " logprobs vs " + std::to_string(relevances.size()) +
                             " relevances");
    }
    double r_sum = 0.0;
    for (size_t i = 0; i < relevances.size(); ++i) {
        if (!(relevances[i] >= 0.0) || !std::isfinite(relevances[i])) {
            throw NumericDomainError("token_sar: relevance " + std::to_string(i) +
                                     " must be non-negative and finite");
        }
        if (chosen_logprobs[i] > 0.0 || !std::isfinite(chosen_logprobs[i])) {
            throw NumericDomainError("token_sar: logprob " + std::to_string(i) +
                                     " must be finite and <= 0");
        }
        r_sum += relevances[i];
    }
    if (r_sum == 0.0) {
        throw NumericDomainError("token_sar: relevances are all zero");
    }
    double acc = 0.0;
    for (size_t i = 0; i < chosen_logprobs.size(); ++i) {
        acc += (-chosen_logprobs[i]) * (relevances[i] / r_sum);
    }
    return {std::max(acc, kUncertaintyFloor), EstimatorKind::TokenSAR};
}

ConfidenceWeight oracle_confidence(const std::string & answer, const std::string & truth,
                                   double w_hi, double w_lo) {
    if (!(w_hi > w_lo) || !(w_lo > 0.0)) {
        throw ConfigError("oracle_confidence: need w_hi > w_lo > 0");
    }
    return {answer == truth ? w_hi : w_lo};
}

ConfidenceWeight confidence_from_uncertainty(const UncertaintyScore & u) {
    if (!(u.value > 0.0) || !std::isfinite(u.value)) {
        throw NumericDomainError("confidence_from_uncertainty: uncertainty must be positive "
                                 "and finite, got " +
                                 std::to_string(u.value));
    }
    return {1.0 / u.value};
}

ConfidenceWeight fixed_confidence(double w) {
    if (!(w > 0.0) || !std::isfinite(w)) {
        throw ConfigError("fixed_confidence: weight must be positive and finite, got " +
                          std::to_string(w));
    }
    return {w};
}

const char * estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::MeanEntropy: return "entropy";
        case EstimatorKind::TokenSAR:    return "token_sar";
        case EstimatorKind::Oracle:      return "oracle";
        case EstimatorKind::Fixed:       return "fixed";
    }
    return "unknown";
}

EstimatorKind estimator_from_name(const std::string & name) {
    if (name == "entropy") {
        return EstimatorKind::MeanEntropy;
    }
    if (name == "token_sar" || name == "tokensar") {
        return EstimatorKind::TokenSAR;
    }
    if (name == "oracle") {
        return EstimatorKind::Oracle;
    }
    if (name == "fixed") {
        return EstimatorKind::Fixed;
    }
    throw ConfigError("unknown estimator: " + name);
}

} // namespace condebate
