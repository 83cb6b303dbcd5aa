#pragma once

// Common dataset schema (one JSON record per line), per-source adapters,
// insufficient-variant construction by supporting-passage removal, and the
// parametric-knowledge filter.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcheck/errors.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/parallel.hpp"
#include "gapcheck/templates.hpp"
#include "gapcheck/text.hpp"

namespace gapcheck {

enum class Label { sufficient, insufficient };

inline const char* to_string(Label l) { return l == Label::sufficient ? "Sufficient" : "Insufficient"; }

inline Label label_from_string(const std::string& s) {
    const std::string t = to_lower(trim(s));
    if (t == "sufficient") return Label::sufficient;
    if (t == "insufficient") return Label::insufficient;
    throw ParseError("unknown label '" + s + "'");
}

enum class Derivation { original, supporting_removed };

inline const char* to_string(Derivation d) {
    return d == Derivation::original ? "original" : "supporting_removed";
}

struct Passage {
    std::string id;
    std::optional<std::string> title;
    std::string text;
    std::optional<bool> supporting; // gold supporting-fact flag where the source provides it
};

/// One question + passage set + optional gold labels; the unit of assessment.
struct QAInstance {
    std::string id;
    std::string question;
    std::vector<Passage> passages;
    std::optional<Label> label;
    std::optional<std::string> gold_answer;
    std::optional<std::string> gold_justification;
    std::string source;
    Derivation derivation = Derivation::original;

    void validate() const {
        if (id.empty()) throw ContractViolation("QAInstance: id must be non-empty");
        if (trim(question).empty()) throw ContractViolation("QAInstance: question must be non-empty");
        for (const auto& p : passages)
            if (trim(p.text).empty()) throw ContractViolation("QAInstance " + id + ": passage text must be non-empty");
        if (derivation == Derivation::supporting_removed &&
            (!label || *label != Label::insufficient))
            throw ContractViolation("QAInstance " + id + ": supporting_removed requires label insufficient");
    }
};

inline void to_json(json& j, const Passage& p) {
    j = json{{"id", p.id}, {"text", p.text}};
    if (p.title) j["title"] = *p.title;
    if (p.supporting) j["supporting"] = *p.supporting;
}

inline void from_json(const json& j, Passage& p) {
    p.id = j.value("id", "");
    p.text = j.at("text").get<std::string>();
    if (j.contains("title")) p.title = j.at("title").get<std::string>();
    if (j.contains("supporting")) p.supporting = j.at("supporting").get<bool>();
}

inline void to_json(json& j, const QAInstance& inst) {
    j = json{{"id", inst.id},
             {"question", inst.question},
             {"passages", inst.passages},
             {"source", inst.source},
             {"derivation", to_string(inst.derivation)}};
    if (inst.label) j["label"] = to_string(*inst.label);
    if (inst.gold_answer) j["gold_answer"] = *inst.gold_answer;
    if (inst.gold_justification) j["gold_justification"] = *inst.gold_justification;
}

inline void from_json(const json& j, QAInstance& inst) {
    inst.id = j.at("id").get<std::string>();
    inst.question = j.at("question").get<std::string>();
    inst.passages = j.at("passages").get<std::vector<Passage>>();
    inst.source = j.value("source", "");
    inst.derivation = j.value("derivation", "original") == "supporting_removed"
                          ? Derivation::supporting_removed
                          : Derivation::original;
    if (j.contains("label")) inst.label = label_from_string(j.at("label").get<std::string>());
    if (j.contains("gold_answer")) inst.gold_answer = j.at("gold_answer").get<std::string>();
    if (j.contains("gold_justification")) inst.gold_justification = j.at("gold_justification").get<std::string>();
}

// ---------------------------------------------------------------------------
// Adapters and loading
// ---------------------------------------------------------------------------

using Adapter = std::function<QAInstance(const json& record, int line_number)>;

namespace adapters {

/// Records already in the common schema.
inline QAInstance native(const json& record, int line_number) {
    try {
        QAInstance inst = record.get<QAInstance>();
        inst.validate();
        return inst;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("native record: ") + e.what(), line_number);
    } catch (const ContractViolation& e) {
        throw SchemaError(std::string("native record: ") + e.what(), line_number);
    }
}

/// HotpotQA-style records: titled paragraphs as [title, [sentences...]] under
/// "context" and gold supporting titles under "supporting_facts".
inline QAInstance hotpotqa(const json& record, int line_number) {
    try {
        QAInstance inst;
        inst.id = record.contains("_id") ? record.at("_id").get<std::string>() : record.at("id").get<std::string>();
        inst.question = record.at("question").get<std::string>();
        if (record.contains("answer")) inst.gold_answer = record.at("answer").get<std::string>();
        inst.source = "hotpotqa";
        inst.label = Label::sufficient; // answerable by construction
        std::set<std::string> supporting_titles;
        for (const auto& sf : record.value("supporting_facts", json::array()))
            supporting_titles.insert(sf.at(0).get<std::string>());
        int i = 0;
        for (const auto& para : record.at("context")) {
            Passage p;
            p.id = "p" + std::to_string(i++);
            p.title = para.at(0).get<std::string>();
            std::string text;
            for (const auto& sent : para.at(1)) {
                if (!text.empty()) text += ' ';
                text += trim(sent.get<std::string>());
            }
            p.text = text;
            p.supporting = supporting_titles.count(*p.title) > 0;
            inst.passages.push_back(std::move(p));
        }
        inst.validate();
        return inst;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("hotpotqa record: ") + e.what(), line_number);
    } catch (const ContractViolation& e) {
        throw SchemaError(std::string("hotpotqa record: ") + e.what(), line_number);
    }
}

} // namespace adapters

class AdapterRegistry {
  public:
    static AdapterRegistry builtin() {
        AdapterRegistry reg;
        reg.adapters_["native"] = adapters::native;
        reg.adapters_["hotpotqa"] = adapters::hotpotqa;
        return reg;
    }

    void register_adapter(const std::string& name, Adapter fn) { adapters_[name] = std::move(fn); }

    const Adapter& get(const std::string& name) const {
        auto it = adapters_.find(name);
        if (it == adapters_.end()) throw UnknownAdapter("no adapter registered for source format '" + name + "'");
        return it->second;
    }

  private:
    std::map<std::string, Adapter> adapters_;
};

/// Loads a line-delimited dataset file through a source adapter. Instance ids
/// must be unique within the file.
inline std::vector<QAInstance> load_dataset(const std::filesystem::path& path, const Adapter& adapter) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file " + path.string());
    std::vector<QAInstance> out;
    std::set<std::string> seen;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaError(std::string("invalid JSON: ") + e.what(), line_number);
        }
        QAInstance inst = adapter(record, line_number);
        if (!seen.insert(inst.id).second)
            throw SchemaError("duplicate instance id '" + inst.id + "'", line_number);
        out.push_back(std::move(inst));
    }
    return out;
}

inline std::vector<QAInstance> load_dataset(const std::filesystem::path& path, const std::string& adapter_name,
                                            const AdapterRegistry& registry = AdapterRegistry::builtin()) {
    return load_dataset(path, registry.get(adapter_name));
}

inline void save_dataset(const std::vector<QAInstance>& instances, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write dataset file " + path.string());
    for (const auto& inst : instances) out << json(inst).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Negative-sample construction
// ---------------------------------------------------------------------------

/// Copy of `inst` with every supporting passage removed, labeled insufficient.
/// Non-supporting passages are preserved verbatim and in order.
inline QAInstance make_insufficient_variant(const QAInstance& inst) {
    if (inst.derivation != Derivation::original)
        throw ContractViolation("make_insufficient_variant: input is already a supporting_removed variant");
    bool any_supporting = false;
    for (const auto& p : inst.passages)
        if (p.supporting && *p.supporting) any_supporting = true;
    if (!any_supporting)
        throw NoSupportingFlags("make_insufficient_variant: instance " + inst.id + " has no supporting passages");

    QAInstance variant = inst;
    variant.passages.clear();
    for (const auto& p : inst.passages)
        if (!(p.supporting && *p.supporting)) variant.passages.push_back(p);
    if (variant.passages.empty())
        throw DegenerateVariant("make_insufficient_variant: removing supporting passages from " + inst.id +
                                " leaves an empty context");
    variant.id = inst.id + "-insufficient";
    variant.label = Label::insufficient;
    variant.derivation = Derivation::supporting_removed;
    return variant;
}

// ---------------------------------------------------------------------------
// Parametric-knowledge filter
// ---------------------------------------------------------------------------

enum class JudgeLabel { correct, incorrect, unclear };

inline const char* to_string(JudgeLabel l) {
    switch (l) {
        case JudgeLabel::correct: return "CORRECT";
        case JudgeLabel::incorrect: return "INCORRECT";
        default: return "UNCLEAR";
    }
}

struct FilterRecord {
    std::string instance_id;
    std::string context_free_answer;
    JudgeLabel judge_label = JudgeLabel::unclear;
    bool kept = true; // kept == (judge_label != CORRECT)
    std::string note;
};

inline void to_json(json& j, const FilterRecord& r) {
    j = json{{"instance_id", r.instance_id},
             {"context_free_answer", r.context_free_answer},
             {"judge_label", to_string(r.judge_label)},
             {"kept", r.kept}};
    if (!r.note.empty()) j["note"] = r.note;
}

struct FilterConfig {
    std::string answer_model;             // generates the context-free answer
    std::string judge_model;              // grades it against the gold answer
    int max_tokens = 256;
    int parallelism = 4;
    std::string context_free_template = template_ids::filter_context_free;
    std::string judge_template = template_ids::filter_judge;
};

struct FilterResult {
    std::vector<QAInstance> kept;
    std::vector<FilterRecord> records;
};

namespace detail {

inline JudgeLabel parse_judge_label(const std::string& raw) {
    // INCORRECT must be probed before CORRECT: substring containment.
    if (contains_word_ci(raw, "INCORRECT")) return JudgeLabel::incorrect;
    if (contains_word_ci(raw, "CORRECT")) return JudgeLabel::correct;
    return JudgeLabel::unclear;
}

} // namespace detail

/// Drops instances whose question the model answers correctly with no
/// context. When no instance carries a gold answer the whole set passes
/// through untouched with zero judge calls. Provider failures retain the
/// instance (judge label UNCLEAR) rather than silently shrinking the set.
inline FilterResult knowledge_filter(const std::vector<QAInstance>& instances, Gateway& gateway,
                                     const FilterConfig& cfg,
                                     const TemplateRegistry& templates = TemplateRegistry::builtin()) {
    FilterResult result;
    const bool any_gold = std::any_of(instances.begin(), instances.end(),
                                      [](const QAInstance& i) { return i.gold_answer.has_value(); });
    if (!any_gold) {
        result.kept = instances;
        return result;
    }
    if (cfg.answer_model.empty() || cfg.judge_model.empty())
        throw ConfigError("knowledge_filter: answer_model and judge_model must be set");
    if (!templates.has(cfg.context_free_template) || !templates.has(cfg.judge_template))
        throw TemplateNotFound("knowledge_filter: filter templates not registered");

    std::vector<FilterRecord> records(instances.size());
    detail::parallel_for(instances.size(), cfg.parallelism, [&](size_t i) {
        const QAInstance& inst = instances[i];
        FilterRecord rec;
        rec.instance_id = inst.id;
        if (!inst.gold_answer) {
            rec.judge_label = JudgeLabel::unclear;
            rec.note = "no gold answer; retained without judging";
        } else {
            try {
                CompletionRequest answer_req;
                answer_req.model_id = cfg.answer_model;
                answer_req.messages = templates.render(cfg.context_free_template, {{"question", inst.question}});
                answer_req.temperature = 0.0;
                answer_req.max_tokens = cfg.max_tokens;
                rec.context_free_answer = trim(gateway.complete(answer_req).text);

                CompletionRequest judge_req;
                judge_req.model_id = cfg.judge_model;
                judge_req.messages = templates.render(cfg.judge_template, {{"question", inst.question},
                                                                           {"gold_answer", *inst.gold_answer},
                                                                           {"generated_answer", rec.context_free_answer}});
                judge_req.temperature = 0.0;
                judge_req.max_tokens = 16;
                const std::string judge_raw = gateway.complete(judge_req).text;
                rec.judge_label = detail::parse_judge_label(judge_raw);
            } catch (const ProviderError& e) {
                rec.judge_label = JudgeLabel::unclear;
                rec.note = std::string("provider error; retained: ") + e.what();
            }
        }
        rec.kept = rec.judge_label != JudgeLabel::correct;
        records[i] = std::move(rec);
    });

    for (size_t i = 0; i < instances.size(); ++i) {
        if (records[i].kept) result.kept.push_back(instances[i]);
        result.records.push_back(std::move(records[i]));
    }
    return result;
}

} // namespace gapcheck
