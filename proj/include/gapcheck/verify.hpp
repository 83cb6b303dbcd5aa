#pragma once

// Step 2b: check whether the consensus gap claim's information is truly
// absent from the context, under a tunable strictness mode, and map the
// outcome to the final sufficiency label.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcheck/consensus.hpp"
#include "gapcheck/datasets.hpp"
#include "gapcheck/errors.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/identify.hpp"
#include "gapcheck/templates.hpp"
#include "gapcheck/text.hpp"

namespace gapcheck {

enum class Strictness { pragmatic, strict };

inline const char* to_string(Strictness s) { return s == Strictness::pragmatic ? "pragmatic" : "strict"; }

inline Strictness strictness_from_string(const std::string& s) {
    const std::string t = to_lower(trim(s));
    if (t == "pragmatic") return Strictness::pragmatic;
    if (t == "strict") return Strictness::strict;
    throw ConfigError("unknown strictness '" + s + "' (expected pragmatic or strict)");
}

inline const char* verification_template_id(Strictness s) {
    return s == Strictness::pragmatic ? template_ids::verify_pragmatic : template_ids::verify_strict;
}

enum class Finding { present, absent };

inline const char* to_string(Finding f) { return f == Finding::present ? "PRESENT" : "ABSENT"; }

struct VerificationResult {
    Finding finding = Finding::absent;
    std::string evidence_quote; // non-empty iff finding == present; verbatim from the context
    std::string raw_text;
    std::vector<std::string> notes;
};

inline void to_json(json& j, const VerificationResult& v) {
    j = json{{"finding", to_string(v.finding)},
             {"evidence_quote", v.evidence_quote},
             {"raw_text", v.raw_text},
             {"notes", v.notes}};
}

inline void from_json(const json& j, VerificationResult& v) {
    v.finding = j.at("finding").get<std::string>() == "PRESENT" ? Finding::present : Finding::absent;
    v.evidence_quote = j.value("evidence_quote", "");
    v.raw_text = j.value("raw_text", "");
    if (j.contains("notes")) v.notes = j.at("notes").get<std::vector<std::string>>();
}

inline std::vector<Message> build_verification_prompt(const std::string& claim, const QAInstance& inst,
                                                      Strictness mode, const TemplateRegistry& templates) {
    if (trim(claim).empty()) throw ContractViolation("build_verification_prompt: claim must be non-empty");
    return templates.render(verification_template_id(mode),
                            {{"claim", claim}, {"context", render_passages(inst)}});
}

/// Lenient extraction of the FINDING/EVIDENCE reply. A PRESENT finding whose
/// evidence quote does not occur in the context (whitespace-normalized) is
/// demoted to ABSENT with a provenance note; the verifier must cite text that
/// actually exists.
inline VerificationResult parse_verification(const std::string& raw, const QAInstance& inst) {
    std::optional<Finding> finding;
    std::string evidence;
    for (const std::string& line : split_lines(raw)) {
        const std::string lowered = to_lower(line);
        if (!finding) {
            const size_t f = lowered.find("finding");
            if (f != std::string::npos) {
                const size_t colon = lowered.find(':', f);
                if (colon != std::string::npos) {
                    const std::string value = lowered.substr(colon + 1);
                    if (contains_word_ci(value, "present")) finding = Finding::present;
                    else if (contains_word_ci(value, "absent")) finding = Finding::absent;
                }
            }
        }
        if (evidence.empty()) {
            const size_t e = lowered.find("evidence");
            if (e != std::string::npos) {
                const size_t colon = line.find(':', e);
                if (colon != std::string::npos) evidence = strip_quotes(trim(line.substr(colon + 1)));
            }
        }
    }
    if (!finding) throw ParseError("no FINDING line found in reply: '" + normalize_ws(raw).substr(0, 120) + "'");

    VerificationResult result;
    result.raw_text = raw;
    result.finding = *finding;
    if (result.finding == Finding::present) {
        const std::string normalized_quote = normalize_ws(evidence);
        const std::string normalized_context = normalize_ws(render_passages(inst));
        if (normalized_quote.empty()) {
            result.finding = Finding::absent;
            result.notes.push_back("PRESENT finding demoted to ABSENT: no evidence quote given");
        } else if (normalized_context.find(normalized_quote) == std::string::npos) {
            result.finding = Finding::absent;
            result.notes.push_back("PRESENT finding demoted to ABSENT: evidence quote not found in context");
        } else {
            result.evidence_quote = evidence;
        }
    }
    return result;
}

/// Builds the verification prompt, queries the model once at temperature 0,
/// and parses the reply. An unparseable reply is retried once as a fresh
/// draw; if that also fails the result is conservatively ABSENT.
inline VerificationResult run_verification(const std::string& claim, const QAInstance& inst, Strictness mode,
                                           const std::string& model_id, int max_tokens, Gateway& gateway,
                                           const TemplateRegistry& templates) {
    CompletionRequest req;
    req.model_id = model_id;
    req.messages = build_verification_prompt(claim, inst, mode, templates);
    req.temperature = 0.0;
    req.max_tokens = max_tokens;
    req.sample_index = 0;
    const std::string raw = gateway.complete(req).text;
    try {
        return parse_verification(raw, inst);
    } catch (const ParseError&) {
    }
    try {
        req.sample_index = 1;
        return parse_verification(gateway.complete(req).text, inst);
    } catch (const ParseError&) {
    } catch (const ScriptMiss&) {
    }
    VerificationResult result;
    result.finding = Finding::absent;
    result.raw_text = raw;
    result.notes.push_back("unparseable verification reply after retry; treated as ABSENT");
    return result;
}

// ---------------------------------------------------------------------------
// Label rules
// ---------------------------------------------------------------------------

/// Final label: the verifier finding the claimed missing information in the
/// context makes it Sufficient; everything else is Insufficient, with the
/// uncertain fallback defaulting conservatively to Insufficient.
inline Label decide(const ConsensusOutcome& consensus, const std::optional<VerificationResult>& verification) {
    const bool expect_verification = consensus.decision == ConsensusDecision::gap_claim;
    if (expect_verification != verification.has_value())
        throw ContractViolation("decide: verification must be present iff the consensus is a gap claim");
    switch (consensus.decision) {
        case ConsensusDecision::no_gap: return Label::sufficient;
        case ConsensusDecision::uncertain_fallback: return Label::insufficient;
        case ConsensusDecision::gap_claim:
            return verification->finding == Finding::present ? Label::sufficient : Label::insufficient;
    }
    throw ContractViolation("decide: unreachable");
}

/// Ablation that predicts from consensus alone: any gap claim (or fallback)
/// is Insufficient without consulting the verifier.
inline Label identify_only_decide(const ConsensusOutcome& consensus) {
    return consensus.decision == ConsensusDecision::no_gap ? Label::sufficient : Label::insufficient;
}

} // namespace gapcheck
