#include "condebate/harness.hpp"

#include "condebate/errors.hpp"
#include "condebate/rng.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace condebate {

namespace fs = std::filesystem;
using nlohmann::json;

const char * format_name(ReportFormat format) {
    switch (format) {
        case ReportFormat::Text:     return "text";
        case ReportFormat::Json:     return "json";
        case ReportFormat::Markdown: return "markdown";
    }
    return "unknown";
}

ReportFormat format_from_name(const std::string & name) {
    if (name == "text" || name == "txt") {
        return ReportFormat::Text;
    }
    if (name == "json") {
        return ReportFormat::Json;
    }
    if (name == "markdown" || name == "md") {
        return ReportFormat::Markdown;
    }
    throw ConfigError("unknown report format: " + name);
}

// ---------------------------------------------------------------------------
// Agent factory
// ---------------------------------------------------------------------------

std::shared_ptr<Backend> make_backend(const AgentSpecData & spec) {
    if (spec.type == "toy") {
        return std::make_shared<ToyDecoderBackend>(spec.toy);
    }
    if (spec.type == "mock") {
        if (!spec.script_file.empty()) {
            return MockBackend::from_json_file(spec.script_file);
        }
        return std::make_shared<MockBackend>(spec.script);
    }
    if (spec.type == "noisy") {
        return std::make_shared<ScriptedNoisyBackend>(spec.accuracy, spec.calibration,
                                                      spec.agent_seed,
                                                      spec.follow_probability);
    }
    if (spec.type == "http") {
        return std::make_shared<HttpBackend>(spec.http);
    }
    throw ConfigError("unknown agent type: " + spec.type);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

bool report_equal(const AccuracyReport & a, const AccuracyReport & b) {
    if (a.schema_version != b.schema_version || a.dataset_size != b.dataset_size ||
        a.seed != b.seed || a.cells.size() != b.cells.size()) {
        return false;
    }
    for (size_t i = 0; i < a.cells.size(); ++i) {
        const auto & x = a.cells[i];
        const auto & y = b.cells[i];
        if (x.estimator != y.estimator || x.method != y.method || x.n != y.n ||
            x.correct != y.correct || x.errored != y.errored || x.accuracy != y.accuracy) {
            return false;
        }
    }
    return true;
}

json report_to_json(const AccuracyReport & r) {
    json cells = json::array();
    for (const auto & c : r.cells) {
        cells.push_back(json{{"estimator", estimator_name(c.estimator)},
                             {"method", method_name(c.method)},
                             {"n", c.n},
                             {"correct", c.correct},
                             {"errored", c.errored},
                             {"accuracy", c.accuracy}});
    }
    return json{{"schema_version", r.schema_version},
                {"dataset_size", r.dataset_size},
                {"seed", r.seed},
                {"cells", cells}};
}

AccuracyReport report_from_json(const json & j) {
    AccuracyReport r;
    r.schema_version = j.at("schema_version").get<int>();
    r.dataset_size = j.at("dataset_size").get<int>();
    r.seed = j.at("seed").get<uint64_t>();
    for (const auto & jc : j.at("cells")) {
        ReportCell c;
        c.estimator = estimator_from_name(jc.at("estimator").get<std::string>());
        c.method = method_from_name(jc.at("method").get<std::string>());
        c.n = jc.at("n").get<int>();
        c.correct = jc.at("correct").get<int>();
        c.errored = jc.at("errored").get<int>();
        c.accuracy = jc.at("accuracy").get<double>();
        r.cells.push_back(c);
    }
    return r;
}

std::string report_render(const AccuracyReport & r, ReportFormat format) {
    if (format == ReportFormat::Json) {
        return report_to_json(r).dump(2) + "\n";
    }
    std::ostringstream out;
    auto fmt_acc = [](double accuracy) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", accuracy);
        return std::string(buf);
    };
    if (format == ReportFormat::Markdown) {
        out << "| Estimator | Method | Arithmetic | n | errored | wall (s) |\n";
        out << "|-----------|--------|------------|---|---------|----------|\n";
        for (const auto & c : r.cells) {
            out << "| " << estimator_name(c.estimator) << " | " << method_name(c.method)
                << " | " << fmt_acc(c.accuracy) << " | " << c.n << " | " << c.errored
                << " | " << fmt_acc(c.wall_seconds) << " |\n";
        }
        return out.str();
    }
    out << "Estimator    Method       Arithmetic    n     errored  wall(s)\n";
    out << "---------------------------------------------------------------\n";
    for (const auto & c : r.cells) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-12s %-12s %-13s %-5d %-8d %.3f\n",
                      estimator_name(c.estimator), method_name(c.method),
                      fmt_acc(c.accuracy).c_str(), c.n, c.errored, c.wall_seconds);
        out << line;
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

AgentSpecData agent_spec_from_json(const json & j) {
    AgentSpecData spec;
    spec.type = j.value("type", std::string("noisy"));
    if (j.contains("fixed_confidence") && !j.at("fixed_confidence").is_null()) {
        spec.fixed_confidence = j.at("fixed_confidence").get<double>();
    }
    if (spec.type == "toy") {
        spec.toy.vocab_size = j.value("vocab_size", spec.toy.vocab_size);
        spec.toy.d_model = j.value("d_model", spec.toy.d_model);
        spec.toy.heads = j.value("heads", spec.toy.heads);
        spec.toy.max_seq = j.value("max_seq", spec.toy.max_seq);
        spec.toy.seed = j.value("seed", spec.toy.seed);
    } else if (spec.type == "mock") {
        if (j.contains("script")) {
            spec.script = j.at("script").get<std::vector<std::string>>();
        }
        spec.script_file = j.value("script_file", std::string());
        if (spec.script.empty() && spec.script_file.empty()) {
            throw ConfigError("mock agent needs a script or script_file");
        }
    } else if (spec.type == "noisy") {
        spec.accuracy = j.value("accuracy", spec.accuracy);
        spec.calibration =
            calibration_from_name(j.value("calibration", std::string("calibrated")));
        spec.agent_seed = j.value("seed", spec.agent_seed);
        spec.follow_probability = j.value("follow_probability", spec.follow_probability);
    } else if (spec.type == "http") {
        spec.http.base_url = j.at("base_url").get<std::string>();
        spec.http.model_name = j.value("model", std::string());
        spec.http.api_key_env = j.value("api_key_env", std::string());
        spec.http.timeout_seconds = j.value("timeout_seconds", spec.http.timeout_seconds);
        spec.http.max_retries = j.value("max_retries", spec.http.max_retries);
        spec.http.logprobs_requested = j.value("logprobs", false);
        spec.http.backoff_base_ms = j.value("backoff_base_ms", spec.http.backoff_base_ms);
    } else {
        throw ConfigError("unknown agent type: " + spec.type);
    }
    return spec;
}

RangePlacement placement_from_name(const std::string & name) {
    if (name == "post_softmax") {
        return RangePlacement::PostSoftmax;
    }
    if (name == "pre_softmax") {
        return RangePlacement::PreSoftmax;
    }
    throw ConfigError("unknown placement: " + name);
}

} // namespace

ExperimentConfig config_from_json(const json & j) {
    ExperimentConfig cfg;
    cfg.dataset_path = j.value("dataset", std::string());
    cfg.n = j.value("n", cfg.n);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.num_rounds = j.value("rounds", cfg.num_rounds);
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto & m : j.at("methods")) {
            cfg.methods.push_back(method_from_name(m.get<std::string>()));
        }
    } else if (j.contains("method")) {
        cfg.methods = {method_from_name(j.at("method").get<std::string>())};
    }
    if (j.contains("estimators")) {
        cfg.estimators.clear();
        for (const auto & e : j.at("estimators")) {
            cfg.estimators.push_back(estimator_from_name(e.get<std::string>()));
        }
    } else if (j.contains("estimator")) {
        cfg.estimators = {estimator_from_name(j.at("estimator").get<std::string>())};
    }
    if (j.contains("agents")) {
        for (const auto & a : j.at("agents")) {
            cfg.agents.push_back(agent_spec_from_json(a));
        }
    }
    if (j.contains("scaling")) {
        const auto & s = j.at("scaling");
        cfg.scaling.lambda = s.value("lambda", cfg.scaling.lambda);
        cfg.scaling.epsilon = s.value("epsilon", cfg.scaling.epsilon);
        cfg.scaling.clamp_nonnegative =
            s.value("clamp_nonnegative", cfg.scaling.clamp_nonnegative);
        if (s.contains("placement")) {
            cfg.scaling.placement = placement_from_name(s.at("placement").get<std::string>());
        }
    }
    cfg.max_new_tokens = j.value("max_new_tokens", cfg.max_new_tokens);
    cfg.weighted_vote = j.value("weighted_vote", cfg.weighted_vote);
    cfg.entropy_sum = j.value("entropy_sum", cfg.entropy_sum);
    cfg.oracle_w_hi = j.value("oracle_w_hi", cfg.oracle_w_hi);
    cfg.oracle_w_lo = j.value("oracle_w_lo", cfg.oracle_w_lo);
    cfg.out_dir = j.value("out", std::string());
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    if (j.contains("format")) {
        cfg.format = format_from_name(j.at("format").get<std::string>());
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw ConfigError("config file " + path + " is not valid JSON");
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

std::vector<AgentSpecData> default_agent_specs(int count) {
    if (count < 1) {
        throw ConfigError("default_agent_specs: need at least one agent");
    }
    std::vector<AgentSpecData> agents(static_cast<size_t>(count));
    for (size_t i = 0; i < agents.size(); ++i) {
        agents[i].type = "noisy";
        agents[i].accuracy = i == 0 ? 0.9 : 0.5;
        agents[i].calibration = CalibrationMode::Calibrated;
        agents[i].agent_seed = i + 1;
    }
    return agents;
}

namespace {

std::string cell_tag(EstimatorKind estimator, DebateMethod method) {
    return std::string(estimator_name(estimator)) + "_" + method_name(method);
}

std::string transcript_filename(EstimatorKind estimator, DebateMethod method, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%05d.jsonl", index);
    return cell_tag(estimator, method) + buf;
}

struct DebateOutcome {
    bool errored = false;
    bool correct = false;
    std::string error;
    std::string transcript_line;
};

} // namespace

AccuracyReport run_experiment(const ExperimentConfig & cfg) {
    if (cfg.parallelism < 1) {
        throw ConfigError("run_experiment: parallelism must be >= 1");
    }
    if (cfg.methods.empty() || cfg.estimators.empty()) {
        throw ConfigError("run_experiment: need at least one method and one estimator");
    }

    const std::vector<ArithmeticProblem> problems =
        cfg.dataset_path.empty() ? generate_problems(cfg.n, cfg.seed)
                                 : load_problems_jsonl(cfg.dataset_path);
    const std::vector<AgentSpecData> agents =
        cfg.agents.empty() ? default_agent_specs(4) : cfg.agents;

    const bool persist = !cfg.out_dir.empty();
    if (persist) {
        fs::create_directories(fs::path(cfg.out_dir) / "transcripts");
    }

    AccuracyReport report;
    report.dataset_size = static_cast<int>(problems.size());
    report.seed = cfg.seed;

    std::vector<std::string> error_lines;
    size_t cell_index = 0;
    for (EstimatorKind estimator : cfg.estimators) {
        for (DebateMethod method : cfg.methods) {
            const auto start = std::chrono::steady_clock::now();
            std::vector<DebateOutcome> outcomes(problems.size());

            std::atomic<size_t> cursor{0};
            auto worker = [&]() {
                size_t i;
                while ((i = cursor.fetch_add(1)) < problems.size()) {
                    const ArithmeticProblem & problem = problems[i];
                    DebateConfig dcfg;
                    dcfg.num_rounds = cfg.num_rounds;
                    dcfg.method = method;
                    dcfg.estimator = estimator;
                    dcfg.scaling = cfg.scaling;
                    dcfg.max_new_tokens = cfg.max_new_tokens;
                    dcfg.weighted_vote = cfg.weighted_vote;
                    dcfg.entropy_sum = cfg.entropy_sum;
                    dcfg.oracle_w_hi = cfg.oracle_w_hi;
                    dcfg.oracle_w_lo = cfg.oracle_w_lo;
                    dcfg.seed = mix_seed(cfg.seed, cell_index + 1, i + 1);
                    for (const auto & spec : agents) {
                        dcfg.agents.push_back({make_backend(spec), spec.fixed_confidence});
                    }
                    DebateOutcome & out = outcomes[i];
                    try {
                        DebateTranscript t =
                            run_debate(problem.question, problem.answer, dcfg);
                        out.correct = t.final_answer == std::to_string(problem.answer);
                        out.transcript_line = transcript_to_json(t).dump();
                    } catch (const std::exception & e) {
                        out.errored = true;
                        out.error = e.what();
                    }
                }
            };
            std::vector<std::thread> pool;
            const int threads = std::min<int>(cfg.parallelism,
                                              static_cast<int>(problems.size()));
            pool.reserve(static_cast<size_t>(threads));
            for (int w = 0; w < threads; ++w) {
                pool.emplace_back(worker);
            }
            for (auto & th : pool) {
                th.join();
            }

            ReportCell cell;
            cell.estimator = estimator;
            cell.method = method;
            for (size_t i = 0; i < outcomes.size(); ++i) {
                const auto & out = outcomes[i];
                if (out.errored) {
                    cell.errored += 1;
                    error_lines.push_back(json{{"estimator", estimator_name(estimator)},
                                               {"method", method_name(method)},
                                               {"index", i},
                                               {"error", out.error}}
                                              .dump());
                    continue;
                }
                cell.n += 1;
                cell.correct += out.correct ? 1 : 0;
                if (persist) {
                    const fs::path path =
                        fs::path(cfg.out_dir) / "transcripts" /
                        transcript_filename(estimator, method, static_cast<int>(i));
                    std::ofstream f(path);
                    if (!f) {
                        throw ConfigError("run_experiment: cannot write " + path.string());
                    }
                    f << out.transcript_line << "\n";
                }
            }
            cell.accuracy = cell.n > 0 ? static_cast<double>(cell.correct) / cell.n : 0.0;
            cell.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
            report.cells.push_back(cell);
            ++cell_index;
        }
    }

    if (persist) {
        {
            std::ofstream f(fs::path(cfg.out_dir) / "report.json");
            f << report_to_json(report).dump(2) << "\n";
        }
        if (cfg.format == ReportFormat::Text) {
            std::ofstream f(fs::path(cfg.out_dir) / "report.txt");
            f << report_render(report, ReportFormat::Text);
        } else if (cfg.format == ReportFormat::Markdown) {
            std::ofstream f(fs::path(cfg.out_dir) / "report.md");
            f << report_render(report, ReportFormat::Markdown);
        }
        if (!error_lines.empty()) {
            std::ofstream f(fs::path(cfg.out_dir) / "errors.jsonl");
            for (const auto & line : error_lines) {
                f << line << "\n";
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

AuditResult audit_output_dir(const std::string & out_dir) {
    AuditResult result;
    const fs::path report_path = fs::path(out_dir) / "report.json";
    std::ifstream in(report_path);
    if (!in) {
        result.detail = "missing " + report_path.string();
        return result;
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        result.detail = "report.json is not valid JSON";
        return result;
    }
    const AccuracyReport stored = report_from_json(j);

    AccuracyReport recomputed;
    recomputed.schema_version = stored.schema_version;
    recomputed.dataset_size = stored.dataset_size;
    recomputed.seed = stored.seed;
    for (const auto & cell : stored.cells) {
        ReportCell rc;
        rc.estimator = cell.estimator;
        rc.method = cell.method;
        const std::string tag = cell_tag(cell.estimator, cell.method);
        for (int i = 0; i < stored.dataset_size; ++i) {
            const fs::path path = fs::path(out_dir) / "transcripts" /
                                  transcript_filename(cell.estimator, cell.method, i);
            std::ifstream tin(path);
            if (!tin) {
                continue; // errored problems have no transcript
            }
            json tj = json::parse(tin, nullptr, false);
            if (tj.is_discarded()) {
                result.detail = "corrupt transcript " + path.string();
                return result;
            }
            DebateTranscript t = transcript_from_json(tj);
            if (!t.ground_truth) {
                result.detail = "transcript without ground truth: " + path.string();
                return result;
            }
            rc.n += 1;
            rc.correct += t.final_answer == std::to_string(*t.ground_truth) ? 1 : 0;
        }
        rc.errored = stored.dataset_size - rc.n;
        rc.accuracy = rc.n > 0 ? static_cast<double>(rc.correct) / rc.n : 0.0;
        recomputed.cells.push_back(rc);

        if (rc.n + rc.errored != stored.dataset_size) {
            result.detail = "cell " + tag + ": transcript count mismatch";
            result.recomputed = recomputed;
            return result;
        }
    }
    result.recomputed = recomputed;
    if (!report_equal(stored, recomputed)) {
        result.detail = "recomputed accuracies disagree with report.json";
        return result;
    }
    result.ok = true;
    result.detail = "audit OK: " + std::to_string(stored.cells.size()) + " cells over " +
                    std::to_string(stored.dataset_size) + " problems";
    return result;
}

} // namespace condebate
