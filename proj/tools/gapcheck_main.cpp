// gapcheck command-line tool: filter / assess / eval / report subcommands.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "gapcheck/cli.hpp"

namespace {

using gapcheck::json;

std::string quote_arg(const std::string& arg) {
    if (arg.find_first_of(" \t\"'") == std::string::npos) return arg;
    std::string out = "'";
    for (char c : arg) {
        if (c == '\'') out += "'\\''";
        else out.push_back(c);
    }
    out += "'";
    return out;
}

std::string join_command_line(int argc, char** argv) {
    std::string out;
    for (int i = 0; i < argc; ++i) {
        if (i > 0) out += ' ';
        out += quote_arg(argv[i]);
    }
    return out;
}

/// Collects CLI flag values into a json object, but only for flags the user
/// actually passed, so the flag > config file > default precedence holds.
class FlagSet {
  public:
    explicit FlagSet(CLI::App* app) : app_(app) {}

    void add_string(const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<std::string>();
        CLI::Option* opt = app_->add_option(flag, *value, help);
        collectors_.push_back([this, key, value, opt] {
            if (opt->count() > 0) flags_[key] = *value;
        });
    }

    void add_int(const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<int>(0);
        CLI::Option* opt = app_->add_option(flag, *value, help);
        collectors_.push_back([this, key, value, opt] {
            if (opt->count() > 0) flags_[key] = *value;
        });
    }

    void add_double(const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<double>(0.0);
        CLI::Option* opt = app_->add_option(flag, *value, help);
        collectors_.push_back([this, key, value, opt] {
            if (opt->count() > 0) flags_[key] = *value;
        });
    }

    /// Provider and run options shared by every subcommand.
    void add_common() {
        add_string("--provider", "provider", "Backend: live or mock");
        add_string("--mock-script", "mock_script", "Mock script file (provider mock)");
        add_string("--base-url", "base_url", "OpenAI-compatible base URL (provider live)");
        add_string("--api-key-env", "api_key_env", "Name of the environment variable holding the API key");
        add_string("--identify-model", "identify_model", "Model for gap-hypothesis sampling");
        add_string("--verify-model", "verify_model", "Model for verification and baselines");
        add_string("--embedding-model", "embedding_model", "Model for sentence embeddings");
        add_string("--judge-model", "judge_model", "Model for filter/alignment judging");
        add_string("--adapter", "adapter", "Dataset adapter (native, hotpotqa)");
        add_string("--cache-dir", "cache_dir", "Response cache directory");
        add_string("--template-dir", "template_dir", "Directory of prompt template overrides");
        add_int("--parallelism", "parallelism", "Max instances/calls in flight");
        add_int("--max-attempts", "max_attempts", "Provider retry attempts");
        add_int("--initial-backoff-ms", "initial_backoff_ms", "First retry backoff in milliseconds");
    }

    json collect() {
        for (const auto& fn : collectors_) fn();
        return flags_;
    }

  private:
    CLI::App* app_;
    json flags_ = json::object();
    std::vector<std::function<void()>> collectors_;
};

struct ConfigFile {
    json values = json::object();
    std::string digest;
};

ConfigFile load_config_file(const std::string& path) {
    ConfigFile cf;
    if (path.empty()) return cf;
    std::ifstream in(path);
    if (!in) throw gapcheck::IoError("cannot open config file " + path);
    try {
        in >> cf.values;
    } catch (const json::exception& e) {
        throw gapcheck::ConfigError("config file " + path + ": " + e.what());
    }
    cf.digest = gapcheck::file_digest(path);
    return cf;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Context sufficiency assessment: identify-then-verify pipeline, baselines, and evaluation"};
    app.require_subcommand(1);
    const std::string command_line = join_command_line(argc, argv);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)")->envname("GAPCHECK_CONFIG");

    // filter
    auto* filter = app.add_subcommand("filter", "Drop questions the model answers correctly without context");
    std::string filter_dataset, filter_out, filter_audit;
    filter->add_option("--dataset", filter_dataset, "Input dataset (one JSON record per line)")->required();
    filter->add_option("--out", filter_out, "Kept-set output file")->required();
    filter->add_option("--audit", filter_audit, "Filter-record audit file")->required();
    FlagSet filter_flags(filter);
    filter_flags.add_common();

    // assess
    auto* assess = app.add_subcommand("assess", "Run a sufficiency system over a dataset");
    std::string assess_dataset, assess_out;
    assess->add_option("--dataset", assess_dataset, "Input dataset")->required();
    assess->add_option("--out", assess_out, "Verdict output file (one JSON record per line)")->required();
    FlagSet assess_flags(assess);
    assess_flags.add_common();
    assess_flags.add_string("--system", "system", "ours | ours-identify-only | autorater | answer-abstain");
    assess_flags.add_string("--mode", "mode", "full | identify-only (for --system ours)");
    assess_flags.add_int("--n-samples", "n_samples", "Identify samples per instance");
    assess_flags.add_double("--temperature", "temperature", "Identify sampling temperature");
    assess_flags.add_double("--threshold", "threshold", "Consensus similarity threshold");
    assess_flags.add_string("--strictness", "strictness", "Verification criteria: pragmatic | strict");
    assess_flags.add_int("--max-tokens", "max_tokens", "Completion token limit for identify");

    // eval
    auto* eval = app.add_subcommand("eval", "Compute metrics from verdict files");
    std::string eval_verdicts, eval_rer, eval_dataset, eval_out_dir;
    bool eval_judge = false;
    double eval_min_accuracy = -1.0;
    eval->add_option("--verdicts", eval_verdicts, "Verdict file to score")->required();
    eval->add_option("--rer", eval_rer, "Identify-only verdict file for relative error reduction");
    eval->add_option("--dataset", eval_dataset, "Gold dataset")->required();
    eval->add_option("--out-dir", eval_out_dir, "Report output directory")->required();
    eval->add_flag("--judge", eval_judge, "Judge justification alignment with the judge model");
    CLI::Option* min_acc_opt =
        eval->add_option("--min-accuracy", eval_min_accuracy, "Fail (non-zero exit) below this accuracy %");
    FlagSet eval_flags(eval);
    eval_flags.add_common();
    eval_flags.add_string("--formats", "formats", "Comma-separated outputs: json,table,svg");

    // report
    auto* report = app.add_subcommand("report", "Re-render table/plots from an existing metrics.json");
    std::string report_metrics, report_out_dir, report_formats = "table,svg";
    report->add_option("--metrics", report_metrics, "metrics.json from a previous eval")->required();
    report->add_option("--out-dir", report_out_dir, "Output directory")->required();
    report->add_option("--formats", report_formats, "Comma-separated outputs: json,table,svg");

    CLI11_PARSE(app, argc, argv);

    try {
        const ConfigFile config = load_config_file(config_path);

        if (filter->parsed()) {
            gapcheck::FilterCmdOptions opts;
            opts.dataset = filter_dataset;
            opts.out = filter_out;
            opts.audit = filter_audit;
            opts.resolved = gapcheck::layered_config(gapcheck::default_run_config(), config.values,
                                                     filter_flags.collect());
            opts.command_line = command_line;
            opts.config_file_digest = config.digest;
            const auto result = gapcheck::cmd_filter(opts);
            std::cout << "kept " << result.kept << ", dropped " << result.dropped << " -> " << filter_out << "\n";
            return 0;
        }
        if (assess->parsed()) {
            gapcheck::AssessCmdOptions opts;
            opts.dataset = assess_dataset;
            opts.out = assess_out;
            opts.resolved = gapcheck::layered_config(gapcheck::default_run_config(), config.values,
                                                     assess_flags.collect());
            opts.command_line = command_line;
            opts.config_file_digest = config.digest;
            const auto result = gapcheck::cmd_assess(opts);
            std::cout << result.verdicts << " verdicts, " << result.errors << " errors -> " << assess_out << "\n";
            // per-instance failures are isolated into error records, not exit codes
            return 0;
        }
        if (eval->parsed()) {
            gapcheck::EvalCmdOptions opts;
            opts.verdicts = eval_verdicts;
            opts.rer_verdicts = eval_rer;
            opts.dataset = eval_dataset;
            opts.out_dir = eval_out_dir;
            opts.judge_alignment = eval_judge;
            if (min_acc_opt->count() > 0) opts.min_accuracy = eval_min_accuracy;
            opts.resolved = gapcheck::layered_config(gapcheck::default_run_config(), config.values,
                                                     eval_flags.collect());
            opts.command_line = command_line;
            opts.config_file_digest = config.digest;
            const auto result = gapcheck::cmd_eval(opts);
            std::cout << "accuracy " << result.report.accuracy_pct << " % over " << result.report.n_instances
                      << " instances -> " << eval_out_dir << "\n";
            if (!result.thresholds_ok) {
                std::cerr << "accuracy threshold violated\n";
                return 2;
            }
            return 0;
        }
        if (report->parsed()) {
            gapcheck::ReportCmdOptions opts;
            opts.metrics = report_metrics;
            opts.out_dir = report_out_dir;
            opts.formats = report_formats;
            const auto files = gapcheck::cmd_report(opts);
            std::cout << "wrote " << files.written.size() << " files -> " << report_out_dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
