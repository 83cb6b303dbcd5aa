#pragma once

// Run orchestration shared by the command-line tool and the test suites:
// option resolution (flag > config file > built-in default), gateway
// construction, the filter/assess/eval/report commands, and the run
// manifest emitted alongside every output file.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcheck/baselines.hpp"
#include "gapcheck/datasets.hpp"
#include "gapcheck/errors.hpp"
#include "gapcheck/eval.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/openai_backend.hpp"
#include "gapcheck/pipeline.hpp"
#include "gapcheck/report.hpp"
#include "gapcheck/templates.hpp"

namespace gapcheck {

inline std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for digest: " + path.string());
    Sha256 h;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) h.update(buf, static_cast<size_t>(in.gcount()));
    return h.hex_digest();
}

/// Option resolution: built-in defaults, overridden by the config file,
/// overridden by explicitly passed flags.
inline json layered_config(const json& defaults, const json& config_file, const json& cli_flags) {
    json out = defaults;
    for (const auto& [k, v] : config_file.items()) out[k] = v;
    for (const auto& [k, v] : cli_flags.items()) out[k] = v;
    return out;
}

/// Built-in defaults for every run-level knob.
inline json default_run_config() {
    return json{{"provider", "mock"},
                {"mock_script", ""},
                {"base_url", "https://api.openai.com/v1"},
                {"api_key_env", "GAPCHECK_API_KEY"},
                {"identify_model", "llama-3.1-8b-instruct"},
                {"verify_model", "gpt-4o"},
                {"embedding_model", "all-minilm-l6-v2"},
                {"judge_model", "gpt-4o"},
                {"filter_answer_model", "gpt-4o"},
                {"adapter", "native"},
                {"system", "ours"},
                {"mode", "full"},
                {"n_samples", 5},
                {"temperature", 0.5},
                {"threshold", 0.55},
                {"strictness", "pragmatic"},
                {"parallelism", 4},
                {"max_tokens", 1024},
                {"verify_max_tokens", 512},
                {"cache_dir", ""},
                {"template_dir", ""},
                {"max_attempts", 3},
                {"initial_backoff_ms", 1000},
                {"timeout_s", 120},
                {"formats", "json,table,svg"}};
}

struct RunManifest {
    std::string command_line;
    std::string config_file_digest;
    std::map<std::string, std::string> template_digests;
    std::map<std::string, std::string> dataset_digests;
    std::string cache_dir;
    std::string started_at;
    std::string finished_at;
    long total_instances = 0;
    long provider_calls = 0;
    long cache_hits = 0;
    json resolved_config;
};

inline void to_json(json& j, const RunManifest& m) {
    j = json{{"command_line", m.command_line},
             {"config_file_digest", m.config_file_digest},
             {"template_digests", m.template_digests},
             {"dataset_digests", m.dataset_digests},
             {"cache_dir", m.cache_dir},
             {"started_at", m.started_at},
             {"finished_at", m.finished_at},
             {"totals",
              {{"instances", m.total_instances}, {"provider_calls", m.provider_calls}, {"cache_hits", m.cache_hits}}},
             {"resolved_config", m.resolved_config}};
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << json(m).dump(2) << '\n';
}

/// Shared run context: resolved config, registries, gateway.
struct RunContext {
    json config;
    TemplateRegistry templates = TemplateRegistry::builtin();
    AdapterRegistry adapters = AdapterRegistry::builtin();
    std::shared_ptr<Gateway> gateway;
    RunManifest manifest;

    static RunContext create(const json& resolved, const std::string& command_line,
                             const std::string& config_file_digest) {
        RunContext ctx;
        ctx.config = resolved;
        ctx.manifest.command_line = command_line;
        ctx.manifest.config_file_digest = config_file_digest;
        ctx.manifest.resolved_config = resolved;
        ctx.manifest.cache_dir = resolved.value("cache_dir", "");
        ctx.manifest.started_at = iso8601_utc_now();

        const std::string template_dir = resolved.value("template_dir", "");
        if (!template_dir.empty()) ctx.templates.load_directory(template_dir);

        std::shared_ptr<Backend> backend;
        const std::string provider = resolved.value("provider", "mock");
        if (provider == "mock") {
            const std::string script_path = resolved.value("mock_script", "");
            if (script_path.empty())
                throw ConfigError("provider 'mock' requires a mock script (--mock-script or config mock_script)");
            backend = std::make_shared<MockBackend>(MockScript::from_file(script_path));
        } else if (provider == "live") {
            OpenAiConfig cfg;
            cfg.base_url = resolved.value("base_url", "");
            const std::string key_env = resolved.value("api_key_env", "GAPCHECK_API_KEY");
            if (const char* key = std::getenv(key_env.c_str())) cfg.api_key = key;
            cfg.retry.max_attempts = resolved.value("max_attempts", 3);
            cfg.retry.initial_backoff = std::chrono::milliseconds(resolved.value("initial_backoff_ms", 1000));
            cfg.timeout = std::chrono::seconds(resolved.value("timeout_s", 120));
            backend = std::make_shared<OpenAiBackend>(cfg);
        } else {
            throw ConfigError("unknown provider '" + provider + "' (expected live or mock)");
        }
        GatewayConfig gw_cfg;
        gw_cfg.cache_dir = resolved.value("cache_dir", "");
        gw_cfg.max_parallel = resolved.value("parallelism", 4);
        ctx.gateway = std::make_shared<Gateway>(backend, gw_cfg);
        return ctx;
    }

    void finish_manifest(long instances) {
        manifest.total_instances = instances;
        const GatewayStats stats = gateway->stats();
        manifest.provider_calls = stats.provider_calls;
        manifest.cache_hits = stats.cache_hits;
        manifest.finished_at = iso8601_utc_now();
    }

    void record_template(const std::string& id) { manifest.template_digests[id] = templates.digest(id); }

    void record_dataset(const std::filesystem::path& path) {
        manifest.dataset_digests[path.string()] = file_digest(path);
    }
};

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

struct FilterCmdOptions {
    std::string dataset;
    std::string out;
    std::string audit;
    json resolved = default_run_config();
    std::string command_line = "gapcheck filter";
    std::string config_file_digest;
};

struct FilterCmdResult {
    size_t kept = 0;
    size_t dropped = 0;
    RunManifest manifest;
};

inline FilterCmdResult cmd_filter(const FilterCmdOptions& opts) {
    RunContext ctx = RunContext::create(opts.resolved, opts.command_line, opts.config_file_digest);
    const auto instances = load_dataset(opts.dataset, opts.resolved.value("adapter", "native"), ctx.adapters);
    ctx.record_dataset(opts.dataset);

    FilterConfig cfg;
    cfg.answer_model = opts.resolved.value("filter_answer_model", "gpt-4o");
    cfg.judge_model = opts.resolved.value("judge_model", "gpt-4o");
    cfg.parallelism = opts.resolved.value("parallelism", 4);
    ctx.record_template(cfg.context_free_template);
    ctx.record_template(cfg.judge_template);

    const FilterResult result = knowledge_filter(instances, *ctx.gateway, cfg, ctx.templates);
    save_dataset(result.kept, opts.out);

    {
        std::ofstream audit(opts.audit, std::ios::trunc);
        if (!audit) throw IoError("cannot write audit file " + opts.audit);
        if (result.records.empty()) {
            audit << json{{"note", "no instance carries a gold answer; entire set retained without judging"}}.dump()
                  << '\n';
        }
        for (const auto& rec : result.records) audit << json(rec).dump() << '\n';
    }

    ctx.finish_manifest(static_cast<long>(instances.size()));
    write_manifest(ctx.manifest, opts.out + ".manifest.json");
    return {result.kept.size(), instances.size() - result.kept.size(), ctx.manifest};
}

// ---------------------------------------------------------------------------
// assess
// ---------------------------------------------------------------------------

struct AssessCmdOptions {
    std::string dataset;
    std::string out;
    json resolved = default_run_config();
    std::string command_line = "gapcheck assess";
    std::string config_file_digest;
};

struct AssessCmdResult {
    size_t verdicts = 0;
    size_t errors = 0;
    RunManifest manifest;
};

inline AssessCmdResult cmd_assess(const AssessCmdOptions& opts) {
    RunContext ctx = RunContext::create(opts.resolved, opts.command_line, opts.config_file_digest);
    const auto instances = load_dataset(opts.dataset, opts.resolved.value("adapter", "native"), ctx.adapters);
    ctx.record_dataset(opts.dataset);

    std::string system = opts.resolved.value("system", "ours");
    std::vector<BatchItem> items;
    if (system == "ours" || system == "ours-identify-only") {
        PipelineConfig cfg;
        cfg.identify.n_samples = opts.resolved.value("n_samples", 5);
        cfg.identify.temperature = opts.resolved.value("temperature", 0.5);
        cfg.identify.model_id = opts.resolved.value("identify_model", "llama-3.1-8b-instruct");
        cfg.identify.max_tokens = opts.resolved.value("max_tokens", 1024);
        cfg.consensus.similarity_threshold = opts.resolved.value("threshold", 0.55);
        cfg.consensus.embedding_model_id = opts.resolved.value("embedding_model", "all-minilm-l6-v2");
        cfg.strictness = strictness_from_string(opts.resolved.value("strictness", "pragmatic"));
        cfg.mode = system == "ours-identify-only" ? PipelineMode::identify_only
                                                  : pipeline_mode_from_string(opts.resolved.value("mode", "full"));
        cfg.parallelism = opts.resolved.value("parallelism", 4);
        cfg.verify_model_id = opts.resolved.value("verify_model", "gpt-4o");
        cfg.verify_max_tokens = opts.resolved.value("verify_max_tokens", 512);
        ctx.record_template(cfg.identify.prompt_template_id);
        if (cfg.mode == PipelineMode::full) ctx.record_template(verification_template_id(cfg.strictness));
        items = assess_batch(instances, cfg, *ctx.gateway, ctx.templates);
    } else if (system == "autorater" || system == "answer-abstain") {
        BaselineConfig cfg;
        cfg.kind = system == "autorater" ? BaselineKind::autorater : BaselineKind::answer_or_abstain;
        cfg.model_id = opts.resolved.value("verify_model", "gpt-4o");
        cfg.parallelism = opts.resolved.value("parallelism", 4);
        ctx.record_template(cfg.template_id());
        items = baseline_assess_batch(instances, cfg, *ctx.gateway, ctx.templates);
    } else {
        throw ConfigError("unknown system '" + system +
                          "' (expected ours, ours-identify-only, autorater, or answer-abstain)");
    }

    write_verdicts(items, opts.out);
    ctx.finish_manifest(static_cast<long>(instances.size()));
    write_manifest(ctx.manifest, opts.out + ".manifest.json");

    AssessCmdResult result;
    result.manifest = ctx.manifest;
    for (const auto& item : items) (item.verdict ? result.verdicts : result.errors) += 1;
    return result;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalCmdOptions {
    std::string verdicts;
    std::string rer_verdicts; // identify-only verdict file; empty to skip RER
    std::string dataset;      // gold dataset
    std::string out_dir;
    bool judge_alignment = false;
    std::optional<double> min_accuracy; // CI gate: violated -> nonzero exit
    json resolved = default_run_config();
    std::string command_line = "gapcheck eval";
    std::string config_file_digest;
};

struct EvalCmdResult {
    EvalReport report;
    bool thresholds_ok = true;
    RunManifest manifest;
};

inline std::vector<std::string> split_formats(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline EvalCmdResult cmd_eval(const EvalCmdOptions& opts) {
    RunContext ctx = RunContext::create(opts.resolved, opts.command_line, opts.config_file_digest);
    const auto instances = load_dataset(opts.dataset, opts.resolved.value("adapter", "native"), ctx.adapters);
    ctx.record_dataset(opts.dataset);
    const GoldLabels gold = gold_labels(instances);

    const VerdictFile main_file = read_verdicts(opts.verdicts);
    ctx.record_dataset(opts.verdicts);

    EvalCmdResult result;
    result.report = build_report(std::filesystem::path(opts.dataset).stem().string(), main_file.verdicts, gold);

    if (!opts.rer_verdicts.empty()) {
        const VerdictFile io_file = read_verdicts(opts.rer_verdicts);
        ctx.record_dataset(opts.rer_verdicts);
        result.report.rer = relative_error_reduction(main_file.verdicts, io_file.verdicts, gold);
        result.report.rer_undefined = !result.report.rer.has_value();
    }

    if (opts.judge_alignment) {
        AlignmentConfig cfg;
        cfg.judge_model = opts.resolved.value("judge_model", "gpt-4o");
        ctx.record_template(cfg.template_id);
        result.report.alignment = judge_alignment(main_file.verdicts, instances, *ctx.gateway, cfg, ctx.templates);
    }

    emit_report(result.report, split_formats(opts.resolved.value("formats", "json,table,svg")), opts.out_dir);
    ctx.finish_manifest(result.report.n_instances);
    write_manifest(ctx.manifest, (std::filesystem::path(opts.out_dir) / "manifest.json").string());
    result.manifest = ctx.manifest;

    if (opts.min_accuracy && result.report.accuracy_pct < *opts.min_accuracy) result.thresholds_ok = false;
    return result;
}

// ---------------------------------------------------------------------------
// report (re-render an existing metrics file)
// ---------------------------------------------------------------------------

struct ReportCmdOptions {
    std::string metrics; // metrics.json produced by cmd_eval
    std::string out_dir;
    std::string formats = "table,svg";
};

inline ReportFiles cmd_report(const ReportCmdOptions& opts) {
    std::ifstream in(opts.metrics);
    if (!in) throw IoError("cannot open metrics file " + opts.metrics);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("metrics file " + opts.metrics + ": " + e.what());
    }
    const EvalReport report = j.get<EvalReport>();
    return emit_report(report, split_formats(opts.formats), opts.out_dir);
}

} // namespace gapcheck
