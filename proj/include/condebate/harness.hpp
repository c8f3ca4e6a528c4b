#pragma once

#include "condebate/backend.hpp"
#include "condebate/dataset.hpp"
#include "condebate/debate.hpp"
#include "condebate/http_backend.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace condebate {

enum class ReportFormat { Text, Json, Markdown };

const char * format_name(ReportFormat format);
ReportFormat format_from_name(const std::string & name);

// Declarative agent description; a fresh Backend is instantiated from it for
// every debate so runs are deterministic regardless of parallelism.
struct AgentSpecData {
    std::string type = "noisy"; // toy | mock | noisy | http
    std::optional<double> fixed_confidence;

    DecoderConfig toy;

    std::vector<std::string> script;
    std::string script_file;

    double accuracy = 0.5;
    CalibrationMode calibration = CalibrationMode::Calibrated;
    uint64_t agent_seed = 0;
    double follow_probability = 0.9;

    HttpBackendConfig http;
};

std::shared_ptr<Backend> make_backend(const AgentSpecData & spec);

// Simulated-agent lineup used when a config names no agents: the first four
// have accuracies 0.9, 0.5, 0.5, 0.5 (calibrated), extras continue at 0.5.
std::vector<AgentSpecData> default_agent_specs(int count);

struct ReportCell {
    EstimatorKind estimator = EstimatorKind::MeanEntropy;
    DebateMethod method = DebateMethod::Standard;
    int n = 0;       // debates that completed
    int correct = 0;
    int errored = 0;
    double accuracy = 0.0;     // correct / n
    double wall_seconds = 0.0; // informational; excluded from JSON and equality
};

struct AccuracyReport {
    int schema_version = 1;
    int dataset_size = 0;
    uint64_t seed = 0;
    std::vector<ReportCell> cells;
};

// Field-wise equality ignoring the informational wall times.
bool report_equal(const AccuracyReport & a, const AccuracyReport & b);

nlohmann::json report_to_json(const AccuracyReport & r);
AccuracyReport report_from_json(const nlohmann::json & j);

// Three-column estimator/method/accuracy table (Text or Markdown), or the
// canonical JSON document.
std::string report_render(const AccuracyReport & r, ReportFormat format);

struct ExperimentConfig {
    std::string dataset_path; // when empty, generate n problems from seed
    int n = 100;
    uint64_t seed = 0;

    int num_rounds = 3;
    std::vector<DebateMethod> methods = {DebateMethod::Standard};
    std::vector<EstimatorKind> estimators = {EstimatorKind::MeanEntropy};
    std::vector<AgentSpecData> agents; // empty = 4 default noisy agents
    RangeScalingConfig scaling;
    int max_new_tokens = 24;
    bool weighted_vote = false;
    bool entropy_sum = false;
    double oracle_w_hi = 10.0;
    double oracle_w_lo = 1.0;

    std::string out_dir; // empty = nothing persisted
    int parallelism = 1;
    ReportFormat format = ReportFormat::Text;
};

ExperimentConfig config_from_json(const nlohmann::json & j);
ExperimentConfig load_config_file(const std::string & path);

// Runs every (estimator, method) cell over the dataset, persists one
// transcript file per problem under <out>/transcripts plus report files, and
// returns the aggregated report. Per-problem failures are recorded in the
// errored column (and <out>/errors.jsonl), never silently dropped.
AccuracyReport run_experiment(const ExperimentConfig & cfg);

struct AuditResult {
    bool ok = false;
    std::string detail;
    AccuracyReport recomputed;
};

// Recomputes accuracies from the persisted transcripts and compares them to
// the stored report.json.
AuditResult audit_output_dir(const std::string & out_dir);

} // namespace condebate
