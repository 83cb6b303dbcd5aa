#pragma once

// Step 1: prompt the model N times at non-zero temperature to state what
// information is missing, and parse each raw reply into a GapHypothesis.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcheck/datasets.hpp"
#include "gapcheck/errors.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/templates.hpp"
#include "gapcheck/text.hpp"

namespace gapcheck {

enum class Polarity { gap, no_gap };

inline const char* to_string(Polarity p) { return p == Polarity::gap ? "GAP" : "NO_GAP"; }

inline Polarity polarity_from_string(const std::string& s) {
    if (s == "GAP") return Polarity::gap;
    if (s == "NO_GAP") return Polarity::no_gap;
    throw ParseError("unknown polarity '" + s + "'");
}

/// One parsed sample from the Identify stage.
struct GapHypothesis {
    Polarity polarity = Polarity::no_gap;
    std::string gap_statement; // empty iff polarity == no_gap
    std::string raw_text;
    int sample_index = 0;
};

inline void to_json(json& j, const GapHypothesis& h) {
    j = json{{"polarity", to_string(h.polarity)},
             {"gap_statement", h.gap_statement},
             {"raw_text", h.raw_text},
             {"sample_index", h.sample_index}};
}

inline void from_json(const json& j, GapHypothesis& h) {
    h.polarity = polarity_from_string(j.at("polarity").get<std::string>());
    h.gap_statement = j.at("gap_statement").get<std::string>();
    h.raw_text = j.value("raw_text", "");
    h.sample_index = j.at("sample_index").get<int>();
}

struct IdentifyConfig {
    int n_samples = 5;
    double temperature = 0.5;
    std::string prompt_template_id = template_ids::identify;
    std::string model_id;
    int max_tokens = 1024;

    void validate() const {
        if (n_samples < 1) throw ContractViolation("IdentifyConfig: n_samples must be >= 1");
        if (n_samples > 1 && temperature <= 0.0)
            throw ContractViolation("IdentifyConfig: temperature must be > 0 when n_samples > 1");
        if (temperature < 0.0) throw ContractViolation("IdentifyConfig: temperature must be >= 0");
    }
};

/// Flat concatenation of titled passages, as embedded into prompts. The same
/// rendering is used when checking verification evidence quotes.
inline std::string render_passages(const QAInstance& inst) {
    std::string out;
    for (size_t i = 0; i < inst.passages.size(); ++i) {
        const Passage& p = inst.passages[i];
        out += "[" + std::to_string(i + 1) + "]";
        if (p.title && !p.title->empty()) out += " " + *p.title;
        out += "\n";
        out += p.text;
        if (i + 1 < inst.passages.size()) out += "\n\n";
    }
    return out;
}

inline std::vector<Message> build_identify_prompt(const QAInstance& inst, const TemplateRegistry& templates,
                                                  const std::string& template_id = template_ids::identify) {
    if (inst.passages.empty())
        throw ContractViolation("build_identify_prompt: instance " + inst.id + " has no passages");
    return templates.render(template_id, {{"question", inst.question}, {"passages", render_passages(inst)}});
}

/// Lenient extraction of the two-line VERDICT/MISSING reply. Tolerates prose
/// around and on the structured lines and case differences. NO_GAP forces an
/// empty gap statement; GAP takes the MISSING line (minus a literal NONE)
/// trimmed to one sentence.
inline GapHypothesis parse_hypothesis(const std::string& raw, int sample_index) {
    std::optional<Polarity> polarity;
    std::string missing;
    for (const std::string& line : split_lines(raw)) {
        const std::string lowered = to_lower(line);
        if (!polarity) {
            const size_t v = lowered.find("verdict");
            if (v != std::string::npos) {
                const size_t colon = lowered.find(':', v);
                if (colon != std::string::npos) {
                    const std::string value = lowered.substr(colon + 1);
                    if (contains_word_ci(value, "no_gap") || contains_word_ci(value, "no gap") ||
                        contains_word_ci(value, "nogap")) {
                        polarity = Polarity::no_gap;
                    } else if (contains_word_ci(value, "gap")) {
                        polarity = Polarity::gap;
                    }
                }
            }
        }
        if (missing.empty()) {
            const size_t m = lowered.find("missing");
            if (m != std::string::npos) {
                const size_t colon = line.find(':', m);
                if (colon != std::string::npos) missing = trim(line.substr(colon + 1));
            }
        }
    }
    if (!polarity) throw ParseError("no VERDICT line found in reply: '" + normalize_ws(raw).substr(0, 120) + "'");

    GapHypothesis h;
    h.polarity = *polarity;
    h.raw_text = raw;
    h.sample_index = sample_index;
    if (h.polarity == Polarity::gap) {
        if (to_lower(trim(missing)) == "none") missing.clear();
        h.gap_statement = first_sentence(missing);
        if (h.gap_statement.empty()) {
            // GAP with no usable MISSING line: keep the claim non-empty by
            // falling back to the reply itself.
            h.gap_statement = normalize_ws(raw);
        }
    }
    return h;
}

/// Queries the model n_samples times (sample_index 0..n-1) and parses each
/// reply. A sample that fails to parse is retried once as a fresh draw
/// (sample_index shifted by n_samples so the cache does not replay the bad
/// text); a still-unparseable sample is conservatively recorded as GAP with
/// the raw reply as its claim. Never returns fewer than n_samples hypotheses.
inline std::vector<GapHypothesis> generate_hypotheses(const QAInstance& inst, const IdentifyConfig& cfg,
                                                      Gateway& gateway, const TemplateRegistry& templates) {
    cfg.validate();
    const std::vector<Message> messages = build_identify_prompt(inst, templates, cfg.prompt_template_id);
    std::vector<GapHypothesis> out;
    out.reserve(static_cast<size_t>(cfg.n_samples));
    for (int i = 0; i < cfg.n_samples; ++i) {
        CompletionRequest req;
        req.model_id = cfg.model_id;
        req.messages = messages;
        req.temperature = cfg.temperature;
        req.max_tokens = cfg.max_tokens;
        req.sample_index = i;
        const std::string raw = gateway.complete(req).text;
        try {
            out.push_back(parse_hypothesis(raw, i));
            continue;
        } catch (const ParseError&) {
        }
        // Retry as a distinct draw; under a mock with no scripted retry entry
        // fall straight through to the conservative default.
        std::string retry_raw;
        try {
            req.sample_index = i + cfg.n_samples;
            retry_raw = gateway.complete(req).text;
            out.push_back(parse_hypothesis(retry_raw, i));
            continue;
        } catch (const ParseError&) {
        } catch (const ScriptMiss&) {
        }
        GapHypothesis fallback;
        fallback.polarity = Polarity::gap;
        fallback.raw_text = raw;
        fallback.sample_index = i;
        fallback.gap_statement = normalize_ws(raw);
        if (fallback.gap_statement.empty()) fallback.gap_statement = "[empty model reply]";
        out.push_back(std::move(fallback));
    }
    return out;
}

} // namespace gapcheck
