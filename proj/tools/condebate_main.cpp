// condebate CLI: dataset generation, debate experiment runs, report
// re-rendering and transcript audits.

#include "condebate/dataset.hpp"
#include "condebate/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

using namespace condebate;

int main(int argc, char ** argv) {
    CLI::App app{"confidence-weighted multi-agent debate runner"};
    app.require_subcommand(1);

    auto * gen = app.add_subcommand("gen-dataset", "Generate an arithmetic problem file");
    int gen_n = 100;
    uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--n", gen_n, "number of problems")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output JSONL path")->required();

    auto * run = app.add_subcommand("run", "Run debates over a dataset and report accuracy");
    std::string run_config, run_dataset, run_method, run_estimator, run_out, run_format;
    int run_n = -1, run_rounds = -1, run_agents = -1, run_par = -1;
    int64_t run_seed = -1;
    run->add_option("--config", run_config, "JSON config file (flags override it)");
    run->add_option("--dataset", run_dataset, "problem JSONL path");
    run->add_option("--n", run_n, "generate this many problems instead of loading");
    run->add_option("--seed", run_seed, "experiment seed");
    run->add_option("--method", run_method, "standard|prompt|attn_others|attn_all");
    run->add_option("--estimator", run_estimator, "entropy|token_sar|oracle");
    run->add_option("--rounds", run_rounds, "debate rounds");
    run->add_option("--agents", run_agents, "agent count (uses the default simulated lineup)");
    run->add_option("--out", run_out, "output directory for transcripts and reports");
    run->add_option("--parallelism", run_par, "max concurrent debates");
    run->add_option("--format", run_format, "text|json|markdown");

    auto * rep = app.add_subcommand("report", "Re-render a stored report.json");
    std::string rep_path, rep_format = "text";
    rep->add_option("--report", rep_path, "path to report.json")->required();
    rep->add_option("--format", rep_format, "text|json|markdown");

    auto * aud = app.add_subcommand("audit",
                                    "Recompute accuracy from persisted transcripts and "
                                    "compare against report.json");
    std::string aud_dir;
    aud->add_option("--out", aud_dir, "experiment output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            save_problems_jsonl(gen_out, generate_problems(gen_n, gen_seed));
            std::cout << "wrote " << gen_n << " problems to " << gen_out << "\n";
            return 0;
        }
        if (run->parsed()) {
            ExperimentConfig cfg =
                run_config.empty() ? ExperimentConfig{} : load_config_file(run_config);
            if (!run_dataset.empty()) {
                cfg.dataset_path = run_dataset;
            }
            if (run_n >= 0) {
                cfg.n = run_n;
                cfg.dataset_path.clear();
            }
            if (run_seed >= 0) {
                cfg.seed = static_cast<uint64_t>(run_seed);
            }
            if (!run_method.empty()) {
                cfg.methods = {method_from_name(run_method)};
            }
            if (!run_estimator.empty()) {
                cfg.estimators = {estimator_from_name(run_estimator)};
            }
            if (run_rounds >= 1) {
                cfg.num_rounds = run_rounds;
            }
            if (run_agents >= 1) {
                cfg.agents = default_agent_specs(run_agents);
            }
            if (!run_out.empty()) {
                cfg.out_dir = run_out;
            }
            if (run_par >= 1) {
                cfg.parallelism = run_par;
            }
            if (!run_format.empty()) {
                cfg.format = format_from_name(run_format);
            }
            AccuracyReport report = run_experiment(cfg);
            std::cout << report_render(report, cfg.format);
            if (!cfg.out_dir.empty()) {
                std::cout << "transcripts and report written to " << cfg.out_dir << "\n";
            }
            return 0;
        }
        if (rep->parsed()) {
            std::ifstream in(rep_path);
            if (!in) {
                std::cerr << "error: cannot open " << rep_path << "\n";
                return 1;
            }
            nlohmann::json j = nlohmann::json::parse(in);
            std::cout << report_render(report_from_json(j), format_from_name(rep_format));
            return 0;
        }
        if (aud->parsed()) {
            AuditResult result = audit_output_dir(aud_dir);
            std::cout << result.detail << "\n";
            return result.ok ? 0 : 1;
        }
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
