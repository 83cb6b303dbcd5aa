#pragma once

// The two comparison systems, behind the same verdict schema as the
// pipeline: a one-shot sufficiency autorater, and an answer-or-abstain
// classifier that reads an "unanswerable" reply as Insufficient.

#include <string>
#include <vector>

#include "gapcheck/datasets.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/identify.hpp"
#include "gapcheck/parallel.hpp"
#include "gapcheck/pipeline.hpp"
#include "gapcheck/templates.hpp"
#include "gapcheck/text.hpp"

namespace gapcheck {

enum class BaselineKind { autorater, answer_or_abstain };

inline const char* to_string(BaselineKind k) {
    return k == BaselineKind::autorater ? "autorater" : "answer-abstain";
}

struct BaselineConfig {
    BaselineKind kind = BaselineKind::autorater;
    std::string model_id;
    int max_tokens = 512;
    int parallelism = 4;

    std::string template_id() const {
        return kind == BaselineKind::autorater ? template_ids::autorater : template_ids::answer_abstain;
    }

    json resolved() const {
        return json{{"system", to_string(kind)},
                    {"model", model_id},
                    {"template", template_id()},
                    {"max_tokens", max_tokens},
                    {"parallelism", parallelism}};
    }

    std::string fingerprint() const { return sha256_hex(resolved().dump()); }
};

/// Replies that count as abstention for the answer-or-abstain baseline; any
/// reply not containing one of these markers is a substantive answer.
inline const std::vector<std::string>& unanswerable_markers() {
    static const std::vector<std::string> markers = {
        "unanswerable", "not answerable", "cannot be answered", "can't be answered",
        "cannot answer", "can't answer", "insufficient information",
    };
    return markers;
}

/// Single one-shot completion parsed to Sufficient/Insufficient. The word
/// "insufficient" is probed first because "sufficient" is a substring of it;
/// an unparseable reply conservatively becomes Insufficient.
inline SufficiencyVerdict autorater_assess(const QAInstance& inst, const BaselineConfig& cfg, Gateway& gateway,
                                           const TemplateRegistry& templates) {
    inst.validate();
    CompletionRequest req;
    req.model_id = cfg.model_id;
    req.messages = templates.render(template_ids::autorater,
                                    {{"question", inst.question}, {"passages", render_passages(inst)}});
    req.temperature = 0.0;
    req.max_tokens = cfg.max_tokens;
    const std::string raw = gateway.complete(req).text;

    SufficiencyVerdict verdict;
    verdict.instance_id = inst.id;
    verdict.system = to_string(BaselineKind::autorater);
    verdict.config_fingerprint = cfg.fingerprint();
    verdict.template_ids["autorater"] = template_ids::autorater;
    verdict.notes.push_back("reply: " + normalize_ws(raw));
    if (contains_word_ci(raw, "insufficient")) {
        verdict.label = Label::insufficient;
    } else if (contains_word_ci(raw, "sufficient")) {
        verdict.label = Label::sufficient;
    } else {
        verdict.label = Label::insufficient;
        verdict.notes.push_back("unparseable autorater reply; defaulted to Insufficient");
    }
    return verdict;
}

/// Asks the model to answer from the context or say "unanswerable" plus a
/// summary of what is missing. An abstention becomes Insufficient with that
/// summary as the verdict's gap text; any substantive answer is Sufficient.
inline SufficiencyVerdict answer_or_abstain_assess(const QAInstance& inst, const BaselineConfig& cfg,
                                                   Gateway& gateway, const TemplateRegistry& templates) {
    inst.validate();
    CompletionRequest req;
    req.model_id = cfg.model_id;
    req.messages = templates.render(template_ids::answer_abstain,
                                    {{"question", inst.question}, {"passages", render_passages(inst)}});
    req.temperature = 0.0;
    req.max_tokens = cfg.max_tokens;
    const std::string raw = trim(gateway.complete(req).text);

    SufficiencyVerdict verdict;
    verdict.instance_id = inst.id;
    verdict.system = to_string(BaselineKind::answer_or_abstain);
    verdict.config_fingerprint = cfg.fingerprint();
    verdict.template_ids["answer_abstain"] = template_ids::answer_abstain;
    verdict.notes.push_back("reply: " + normalize_ws(raw));

    if (raw.empty()) {
        verdict.label = Label::insufficient;
        verdict.notes.push_back("empty reply; defaulted to Insufficient");
        return verdict;
    }
    const std::string lowered = to_lower(raw);
    for (const auto& marker : unanswerable_markers()) {
        const size_t pos = lowered.find(marker);
        if (pos == std::string::npos) continue;
        verdict.label = Label::insufficient;
        std::string summary = trim(raw.substr(pos + marker.size()));
        for (;;) {
            summary = trim(summary);
            if (summary.empty()) break;
            const char c = summary.front();
            if (c == '-' || c == ':' || c == ',' || c == '.' || c == ';') {
                summary = summary.substr(1);
            } else if (summary.rfind("—", 0) == 0 || summary.rfind("–", 0) == 0) {
                summary = summary.substr(3);
            } else {
                break;
            }
        }
        verdict.gap_text = summary.empty() ? normalize_ws(raw) : normalize_ws(summary);
        return verdict;
    }
    verdict.label = Label::sufficient;
    return verdict;
}

inline SufficiencyVerdict baseline_assess(const QAInstance& inst, const BaselineConfig& cfg, Gateway& gateway,
                                          const TemplateRegistry& templates) {
    return cfg.kind == BaselineKind::autorater ? autorater_assess(inst, cfg, gateway, templates)
                                               : answer_or_abstain_assess(inst, cfg, gateway, templates);
}

inline std::vector<BatchItem> baseline_assess_batch(const std::vector<QAInstance>& instances,
                                                    const BaselineConfig& cfg, Gateway& gateway,
                                                    const TemplateRegistry& templates) {
    std::vector<BatchItem> items(instances.size());
    detail::parallel_for(instances.size(), cfg.parallelism, [&](size_t i) {
        items[i].instance_id = instances[i].id;
        try {
            items[i].verdict = baseline_assess(instances[i], cfg, gateway, templates);
        } catch (const std::exception& e) {
            items[i].error = e.what();
        }
    });
    return items;
}

} // namespace gapcheck
