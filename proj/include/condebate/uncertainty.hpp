#pragma once

#include <string>
#include <vector>

namespace condebate {

enum class EstimatorKind {
    MeanEntropy,
    TokenSAR,
    Oracle,
    Fixed,
};

// Positive uncertainty value; estimators floor it (see kUncertaintyFloor) so
// the 1/u conversion stays finite for deterministic generations.
struct UncertaintyScore {
    double value = 1.0;
    EstimatorKind estimator = EstimatorKind::Fixed;
};

struct ConfidenceWeight {
    double value = 1.0;
};

inline constexpr double kUncertaintyFloor = 1e-6;

struct EntropyOptions {
    bool aggregate_sum = false; // sum over steps instead of the default mean
};

// Mean (or summed) Shannon entropy in nats over per-step probability vectors.
// Each vector must be a distribution (entries >= 0, sum within 1e-6 of 1).
UncertaintyScore mean_token_entropy(const std::vector<std::vector<double>> & steps,
                                    const EntropyOptions & opts = {});

// Relevance-normalized weighted mean of negative log-probabilities. With
// uniform relevances this is exactly the mean negative log-likelihood.
UncertaintyScore token_sar(const std::vector<double> & chosen_logprobs,
                           const std::vector<double> & relevances);

// Diagnostic estimator: w_hi when the answer matches the ground truth, w_lo
// otherwise.
ConfidenceWeight oracle_confidence(const std::string & answer, const std::string & truth,
                                   double w_hi = 10.0, double w_lo = 1.0);

// confidence = 1 / uncertainty.
ConfidenceWeight confidence_from_uncertainty(const UncertaintyScore & u);

// Constant manual weight (the third-party agent's channel).
ConfidenceWeight fixed_confidence(double w);

const char * estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string & name);

} // namespace condebate
