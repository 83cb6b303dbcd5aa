#pragma once

// Composes identify -> consensus -> verify into a single assessment with
// full provenance, in both full and identify-only modes.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcheck/consensus.hpp"
#include "gapcheck/datasets.hpp"
#include "gapcheck/errors.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/identify.hpp"
#include "gapcheck/parallel.hpp"
#include "gapcheck/templates.hpp"
#include "gapcheck/verify.hpp"

namespace gapcheck {

enum class PipelineMode { full, identify_only };

inline const char* to_string(PipelineMode m) { return m == PipelineMode::full ? "full" : "identify-only"; }

inline PipelineMode pipeline_mode_from_string(const std::string& s) {
    const std::string t = to_lower(trim(s));
    if (t == "full") return PipelineMode::full;
    if (t == "identify-only" || t == "identify_only") return PipelineMode::identify_only;
    throw ConfigError("unknown mode '" + s + "' (expected full or identify-only)");
}

struct PipelineConfig {
    IdentifyConfig identify;
    ConsensusConfig consensus;
    Strictness strictness = Strictness::pragmatic;
    PipelineMode mode = PipelineMode::full;
    int parallelism = 4;
    std::string verify_model_id;
    int verify_max_tokens = 512;

    void validate() const {
        identify.validate();
        consensus.validate();
        if (parallelism < 1) throw ContractViolation("PipelineConfig: parallelism must be >= 1");
    }

    /// System name recorded into verdicts produced by this config.
    std::string system_name() const { return mode == PipelineMode::full ? "ours" : "ours-identify-only"; }

    json resolved() const {
        return json{{"system", system_name()},
                    {"mode", to_string(mode)},
                    {"n_samples", identify.n_samples},
                    {"temperature", identify.temperature},
                    {"identify_template", identify.prompt_template_id},
                    {"identify_model", identify.model_id},
                    {"identify_max_tokens", identify.max_tokens},
                    {"similarity_threshold", consensus.similarity_threshold},
                    {"embedding_model", consensus.embedding_model_id},
                    {"strictness", to_string(strictness)},
                    {"verify_template", verification_template_id(strictness)},
                    {"verify_model", verify_model_id},
                    {"verify_max_tokens", verify_max_tokens},
                    {"parallelism", parallelism}};
    }

    std::string fingerprint() const { return sha256_hex(resolved().dump()); }
};

/// Final label with the full provenance needed to re-derive it. Stage
/// timings are kept in memory for manifest totals but never serialized into
/// verdict records, which must be byte-identical across replays.
struct SufficiencyVerdict {
    std::string instance_id;
    std::string system; // ours | ours-identify-only | autorater | answer-abstain
    Label label = Label::insufficient;
    std::vector<GapHypothesis> hypotheses;
    std::optional<ConsensusOutcome> consensus;
    std::optional<VerificationResult> verification;
    std::string gap_text; // consensus claim, or a baseline's missing-info summary
    std::string config_fingerprint;
    std::map<std::string, std::string> template_ids;
    std::vector<std::string> notes;
    std::map<std::string, double> stage_millis; // not serialized
};

inline void to_json(json& j, const SufficiencyVerdict& v) {
    j = json{{"instance_id", v.instance_id},
             {"system", v.system},
             {"label", to_string(v.label)},
             {"hypotheses", v.hypotheses},
             {"gap_text", v.gap_text},
             {"config_fingerprint", v.config_fingerprint},
             {"template_ids", v.template_ids},
             {"notes", v.notes}};
    j["consensus"] = v.consensus ? json(*v.consensus) : json(nullptr);
    j["verification"] = v.verification ? json(*v.verification) : json(nullptr);
}

inline void from_json(const json& j, SufficiencyVerdict& v) {
    v.instance_id = j.at("instance_id").get<std::string>();
    v.system = j.value("system", "ours");
    v.label = label_from_string(j.at("label").get<std::string>());
    if (j.contains("hypotheses")) v.hypotheses = j.at("hypotheses").get<std::vector<GapHypothesis>>();
    if (j.contains("consensus") && !j.at("consensus").is_null())
        v.consensus = j.at("consensus").get<ConsensusOutcome>();
    if (j.contains("verification") && !j.at("verification").is_null())
        v.verification = j.at("verification").get<VerificationResult>();
    v.gap_text = j.value("gap_text", "");
    v.config_fingerprint = j.value("config_fingerprint", "");
    if (j.contains("template_ids"))
        v.template_ids = j.at("template_ids").get<std::map<std::string, std::string>>();
    if (j.contains("notes")) v.notes = j.at("notes").get<std::vector<std::string>>();
}

/// Recomputes the label a stored verdict must carry from its own provenance.
/// Baseline verdicts are returned as stored (they have no consensus to
/// re-derive from).
inline Label rederive_label(const SufficiencyVerdict& v) {
    if (v.system == "ours") {
        if (!v.consensus) throw ContractViolation("verdict from 'ours' lacks consensus provenance");
        return decide(*v.consensus, v.verification);
    }
    if (v.system == "ours-identify-only") {
        if (!v.consensus) throw ContractViolation("verdict from 'ours-identify-only' lacks consensus provenance");
        return identify_only_decide(*v.consensus);
    }
    return v.label;
}

// ---------------------------------------------------------------------------
// Assessment
// ---------------------------------------------------------------------------

/// Runs the three stages in order for one instance. Verification only runs
/// in full mode and only when the consensus produced a gap claim. Stage
/// failures propagate with a stage tag.
inline SufficiencyVerdict assess(const QAInstance& inst, const PipelineConfig& cfg, Gateway& gateway,
                                 const TemplateRegistry& templates) {
    cfg.validate();
    inst.validate();
    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    SufficiencyVerdict verdict;
    verdict.instance_id = inst.id;
    verdict.system = cfg.system_name();
    verdict.config_fingerprint = cfg.fingerprint();
    verdict.template_ids["identify"] = cfg.identify.prompt_template_id;

    auto t0 = clock::now();
    try {
        verdict.hypotheses = generate_hypotheses(inst, cfg.identify, gateway, templates);
    } catch (const Error& e) {
        throw ProviderError("[identify] " + std::string(e.what()));
    }
    verdict.stage_millis["identify"] = ms_since(t0);

    t0 = clock::now();
    ConsensusOutcome consensus;
    try {
        consensus = establish_consensus(verdict.hypotheses, cfg.consensus, gateway);
    } catch (const Error& e) {
        throw ProviderError("[consensus] " + std::string(e.what()));
    }
    verdict.stage_millis["consensus"] = ms_since(t0);

    if (cfg.mode == PipelineMode::identify_only) {
        verdict.label = identify_only_decide(consensus);
    } else {
        verdict.template_ids["verify"] = verification_template_id(cfg.strictness);
        if (consensus.decision == ConsensusDecision::gap_claim) {
            t0 = clock::now();
            try {
                verdict.verification = run_verification(consensus.claim, inst, cfg.strictness,
                                                        cfg.verify_model_id, cfg.verify_max_tokens, gateway,
                                                        templates);
            } catch (const Error& e) {
                throw ProviderError("[verify] " + std::string(e.what()));
            }
            verdict.stage_millis["verify"] = ms_since(t0);
        }
        verdict.label = decide(consensus, verdict.verification);
    }
    verdict.gap_text = consensus.decision == ConsensusDecision::gap_claim ? consensus.claim : "";
    verdict.consensus = std::move(consensus);
    return verdict;
}

/// One batch slot: either a verdict or an isolated per-instance error.
struct BatchItem {
    std::string instance_id;
    std::optional<SufficiencyVerdict> verdict;
    std::optional<std::string> error;
};

inline void to_json(json& j, const BatchItem& item) {
    if (item.verdict) {
        j = json(*item.verdict);
    } else {
        j = json{{"instance_id", item.instance_id}, {"error", item.error.value_or("unknown error")}};
    }
}

/// Assesses a batch with at most cfg.parallelism instances in flight.
/// Verdicts come back in input order; a failing instance becomes an error
/// record without aborting the batch.
inline std::vector<BatchItem> assess_batch(const std::vector<QAInstance>& instances, const PipelineConfig& cfg,
                                           Gateway& gateway, const TemplateRegistry& templates) {
    cfg.validate();
    {
        std::set<std::string> ids;
        for (const auto& inst : instances)
            if (!ids.insert(inst.id).second)
                throw ContractViolation("assess_batch: duplicate instance id '" + inst.id + "'");
    }
    std::vector<BatchItem> items(instances.size());
    detail::parallel_for(instances.size(), cfg.parallelism, [&](size_t i) {
        items[i].instance_id = instances[i].id;
        try {
            items[i].verdict = assess(instances[i], cfg, gateway, templates);
        } catch (const std::exception& e) {
            items[i].error = e.what();
        }
    });
    return items;
}

// ---------------------------------------------------------------------------
// Verdict files (one JSON record per line)
// ---------------------------------------------------------------------------

inline void write_verdicts(const std::vector<BatchItem>& items, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write verdict file " + path.string());
    for (const auto& item : items) out << json(item).dump() << '\n';
}

struct VerdictFile {
    std::vector<SufficiencyVerdict> verdicts;
    std::vector<json> errors;
};

inline VerdictFile read_verdicts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open verdict file " + path.string());
    VerdictFile file;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaError(std::string("invalid verdict JSON: ") + e.what(), line_number);
        }
        if (record.contains("error")) {
            file.errors.push_back(std::move(record));
        } else {
            file.verdicts.push_back(record.get<SufficiencyVerdict>());
        }
    }
    return file;
}

} // namespace gapcheck
