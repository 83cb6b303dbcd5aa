#pragma once

// Metrics over verdict files: accuracy with a 2x2 confusion table,
// disagreement curves over repeated polarity judgments, relative error
// reduction against the identify-only ablation, and rubric-judged
// justification alignment.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
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
#include "gapcheck/pipeline.hpp"
#include "gapcheck/templates.hpp"

namespace gapcheck {

/// Positive class is Insufficient (the detection target).
struct ConfusionCounts {
    long tp = 0; // predicted Insufficient, gold Insufficient
    long tn = 0; // predicted Sufficient,   gold Sufficient
    long fp = 0; // predicted Insufficient, gold Sufficient
    long fn = 0; // predicted Sufficient,   gold Insufficient
    long total() const { return tp + tn + fp + fn; }
};

inline void to_json(json& j, const ConfusionCounts& c) {
    j = json{{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

inline void from_json(const json& j, ConfusionCounts& c) {
    c.tp = j.value("tp", 0L);
    c.tn = j.value("tn", 0L);
    c.fp = j.value("fp", 0L);
    c.fn = j.value("fn", 0L);
}

struct AccuracyResult {
    double accuracy_pct = 0.0;
    ConfusionCounts confusion;
};

using GoldLabels = std::map<std::string, Label>;

inline GoldLabels gold_labels(const std::vector<QAInstance>& instances) {
    GoldLabels gold;
    for (const auto& inst : instances)
        if (inst.label) gold[inst.id] = *inst.label;
    return gold;
}

/// Exact-match accuracy over the two labels. Every verdict's instance must
/// carry a gold label.
inline AccuracyResult accuracy(const std::vector<SufficiencyVerdict>& verdicts, const GoldLabels& gold) {
    AccuracyResult result;
    for (const auto& v : verdicts) {
        auto it = gold.find(v.instance_id);
        if (it == gold.end()) throw MissingGold("no gold label for instance '" + v.instance_id + "'");
        const bool pred_insufficient = v.label == Label::insufficient;
        const bool gold_insufficient = it->second == Label::insufficient;
        if (pred_insufficient && gold_insufficient) ++result.confusion.tp;
        else if (!pred_insufficient && !gold_insufficient) ++result.confusion.tn;
        else if (pred_insufficient && !gold_insufficient) ++result.confusion.fp;
        else ++result.confusion.fn;
    }
    const long total = result.confusion.total();
    result.accuracy_pct =
        total == 0 ? 0.0 : 100.0 * static_cast<double>(result.confusion.tp + result.confusion.tn) / total;
    return result;
}

/// RER = (E_io - E_full) / E_io * 100: the share of identify-only errors the
/// verification step corrects. Undefined (nullopt) when identify-only makes
/// no errors. Both verdict sets must cover the same instances.
inline std::optional<double> relative_error_reduction(const std::vector<SufficiencyVerdict>& full_verdicts,
                                                      const std::vector<SufficiencyVerdict>& identify_only_verdicts,
                                                      const GoldLabels& gold) {
    std::set<std::string> full_ids, io_ids;
    for (const auto& v : full_verdicts) full_ids.insert(v.instance_id);
    for (const auto& v : identify_only_verdicts) io_ids.insert(v.instance_id);
    if (full_ids != io_ids)
        throw MismatchedSets("relative_error_reduction: verdict files cover different instance sets");

    auto errors = [&gold](const std::vector<SufficiencyVerdict>& vs) {
        long e = 0;
        for (const auto& v : vs) {
            auto it = gold.find(v.instance_id);
            if (it == gold.end()) throw MissingGold("no gold label for instance '" + v.instance_id + "'");
            if (v.label != it->second) ++e;
        }
        return e;
    };
    const long e_full = errors(full_verdicts);
    const long e_io = errors(identify_only_verdicts);
    if (e_io == 0) return std::nullopt;
    return 100.0 * static_cast<double>(e_io - e_full) / static_cast<double>(e_io);
}

/// Disagreement curve over the verdicts' stored Step-1 polarities, for
/// k = 1 .. smallest hypothesis count. Empty when any verdict has no
/// hypotheses (baseline files).
inline std::vector<std::pair<int, double>> disagreement_curve(const std::vector<SufficiencyVerdict>& verdicts) {
    if (verdicts.empty()) return {};
    std::vector<std::vector<Polarity>> runs;
    size_t min_runs = SIZE_MAX;
    for (const auto& v : verdicts) {
        if (v.hypotheses.empty()) return {};
        std::vector<Polarity> ps;
        for (const auto& h : v.hypotheses) ps.push_back(h.polarity);
        min_runs = std::min(min_runs, ps.size());
        runs.push_back(std::move(ps));
    }
    std::vector<std::pair<int, double>> curve;
    for (int k = 1; k <= static_cast<int>(min_runs); ++k)
        curve.emplace_back(k, disagreement_rate(runs, k));
    return curve;
}

// ---------------------------------------------------------------------------
// Justification alignment (LLM judge)
// ---------------------------------------------------------------------------

struct AlignmentConfig {
    std::string judge_model;
    std::string template_id = template_ids::alignment_judge;
    int max_tokens = 16;
};

namespace detail {

inline std::optional<int> parse_rubric_score(const std::string& raw) {
    for (size_t i = 0; i < raw.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(raw[i]))) {
            // reject multi-digit numbers like "10"
            if (i + 1 < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i + 1]))) return std::nullopt;
            const int value = raw[i] - '0';
            if (value >= 1 && value <= 5) return value;
            return std::nullopt;
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Rates how well a system explanation aligns with a gold justification on
/// the anchored 1-5 rubric. Out-of-range or unparseable judge replies are
/// retried once, then rejected.
inline int alignment_judge(const std::string& candidate, const std::string& reference, Gateway& gateway,
                           const AlignmentConfig& cfg, const TemplateRegistry& templates) {
    if (trim(candidate).empty() || trim(reference).empty())
        throw ContractViolation("alignment_judge: both explanations must be non-empty");
    CompletionRequest req;
    req.model_id = cfg.judge_model;
    req.messages = templates.render(cfg.template_id, {{"candidate", candidate}, {"reference", reference}});
    req.temperature = 0.0;
    req.max_tokens = cfg.max_tokens;
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.sample_index = attempt;
        std::string raw;
        try {
            raw = gateway.complete(req).text;
        } catch (const ScriptMiss&) {
            if (attempt == 0) continue;
            throw;
        }
        if (auto score = detail::parse_rubric_score(raw)) return *score;
    }
    throw JudgeParseError("alignment judge returned no usable 1-5 score after retry");
}

struct AlignmentSummary {
    double mean = 0.0;
    std::array<long, 5> histogram{}; // counts for scores 1..5
    long judged = 0;
    long errors = 0;
};

inline void to_json(json& j, const AlignmentSummary& a) {
    j = json{{"mean", a.mean}, {"histogram", a.histogram}, {"judged", a.judged}, {"errors", a.errors}};
}

inline void from_json(const json& j, AlignmentSummary& a) {
    a.mean = j.value("mean", 0.0);
    if (j.contains("histogram")) a.histogram = j.at("histogram").get<std::array<long, 5>>();
    a.judged = j.value("judged", 0L);
    a.errors = j.value("errors", 0L);
}

/// Judges alignment for every verdict that predicted Insufficient with a
/// non-empty gap text on an instance carrying a gold justification.
inline AlignmentSummary judge_alignment(const std::vector<SufficiencyVerdict>& verdicts,
                                        const std::vector<QAInstance>& instances, Gateway& gateway,
                                        const AlignmentConfig& cfg, const TemplateRegistry& templates) {
    std::map<std::string, const QAInstance*> by_id;
    for (const auto& inst : instances) by_id[inst.id] = &inst;
    AlignmentSummary summary;
    double sum = 0.0;
    for (const auto& v : verdicts) {
        if (v.label != Label::insufficient || trim(v.gap_text).empty()) continue;
        auto it = by_id.find(v.instance_id);
        if (it == by_id.end() || !it->second->gold_justification) continue;
        try {
            const int score = alignment_judge(v.gap_text, *it->second->gold_justification, gateway, cfg, templates);
            ++summary.judged;
            ++summary.histogram[static_cast<size_t>(score - 1)];
            sum += score;
        } catch (const Error&) {
            ++summary.errors;
        }
    }
    if (summary.judged > 0) summary.mean = sum / static_cast<double>(summary.judged);
    return summary;
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

struct EvalReport {
    std::string dataset;
    std::string system;
    long n_instances = 0; // scored instances
    double accuracy_pct = 0.0;
    ConfusionCounts confusion;
    std::vector<std::pair<int, double>> disagreement_curve;
    std::optional<double> rer;
    bool rer_undefined = false; // identify-only made no errors
    std::optional<AlignmentSummary> alignment;
    std::string config_fingerprint;
};

inline void to_json(json& j, const EvalReport& r) {
    j = json{{"schema_version", 1},
             {"dataset", r.dataset},
             {"system", r.system},
             {"n_instances", r.n_instances},
             {"accuracy_pct", r.accuracy_pct},
             {"confusion", r.confusion},
             {"config_fingerprint", r.config_fingerprint}};
    if (!r.disagreement_curve.empty()) {
        json curve = json::array();
        for (const auto& [k, pct] : r.disagreement_curve) curve.push_back(json{{"k", k}, {"pct", pct}});
        j["disagreement_curve"] = std::move(curve);
    }
    if (r.rer) j["rer_pct"] = *r.rer;
    if (r.rer_undefined) j["rer_undefined"] = true;
    if (r.alignment) j["alignment"] = *r.alignment;
}

inline void from_json(const json& j, EvalReport& r) {
    r.dataset = j.value("dataset", "");
    r.system = j.value("system", "");
    r.n_instances = j.value("n_instances", 0L);
    r.accuracy_pct = j.value("accuracy_pct", 0.0);
    if (j.contains("confusion")) r.confusion = j.at("confusion").get<ConfusionCounts>();
    r.config_fingerprint = j.value("config_fingerprint", "");
    if (j.contains("disagreement_curve"))
        for (const auto& point : j.at("disagreement_curve"))
            r.disagreement_curve.emplace_back(point.at("k").get<int>(), point.at("pct").get<double>());
    if (j.contains("rer_pct")) r.rer = j.at("rer_pct").get<double>();
    r.rer_undefined = j.value("rer_undefined", false);
    if (j.contains("alignment")) r.alignment = j.at("alignment").get<AlignmentSummary>();
}

inline EvalReport build_report(const std::string& dataset_name, const std::vector<SufficiencyVerdict>& verdicts,
                               const GoldLabels& gold) {
    EvalReport report;
    report.dataset = dataset_name;
    report.system = verdicts.empty() ? "" : verdicts.front().system;
    report.config_fingerprint = verdicts.empty() ? "" : verdicts.front().config_fingerprint;
    const AccuracyResult acc = accuracy(verdicts, gold);
    report.n_instances = acc.confusion.total();
    report.accuracy_pct = acc.accuracy_pct;
    report.confusion = acc.confusion;
    report.disagreement_curve = disagreement_curve(verdicts);
    return report;
}

} // namespace gapcheck
