#pragma once

// Versioned prompt templates. A template is a text block with named
// {placeholders}; an optional system section is separated from the user
// section by a line containing only "---". Built-in defaults ship with the
// library and can be overridden from a directory of files whose relative
// path (minus extension) is the template id, e.g. identify/v1.txt.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gapcheck/errors.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/sha256.hpp"
#include "gapcheck/text.hpp"

namespace gapcheck {

namespace template_ids {
inline constexpr const char* identify = "identify/v1";
inline constexpr const char* verify_pragmatic = "verify/pragmatic/v1";
inline constexpr const char* verify_strict = "verify/strict/v1";
inline constexpr const char* autorater = "autorater/v1";
inline constexpr const char* answer_abstain = "answer_abstain/v1";
inline constexpr const char* filter_context_free = "filter/context_free/v1";
inline constexpr const char* filter_judge = "filter/judge/v1";
inline constexpr const char* alignment_judge = "align/judge/v1";
} // namespace template_ids

namespace detail {

inline const std::map<std::string, std::string>& builtin_templates() {
    static const std::map<std::string, std::string> store = {
        {template_ids::identify,
         "You review whether a context contains enough information to answer a question.\n"
         "---\n"
         "Question: {question}\n"
         "\n"
         "Context:\n"
         "{passages}\n"
         "\n"
         "What specific information, if any, is missing from the context but needed to answer the question?\n"
         "Reply in exactly two lines:\n"
         "VERDICT: GAP or NO_GAP\n"
         "MISSING: <one sentence naming the missing information, or NONE>\n"},

        {template_ids::verify_pragmatic,
         "You check claims about missing information against a source text.\n"
         "---\n"
         "Context:\n"
         "{context}\n"
         "\n"
         "Claim about missing information: {claim}\n"
         "\n"
         "Decide whether the information named in the claim is actually present in the context.\n"
         "Accept synonyms, paraphrasing, and reasonable inferences from the context as valid evidence of presence.\n"
         "Reply in exactly two lines:\n"
         "FINDING: PRESENT or ABSENT\n"
         "EVIDENCE: \"<verbatim quote from the context>\" (leave empty when ABSENT)\n"},

        {template_ids::verify_strict,
         "You check claims about missing information against a source text.\n"
         "---\n"
         "Context:\n"
         "{context}\n"
         "\n"
         "Claim about missing information: {claim}\n"
         "\n"
         "Decide whether the information named in the claim is actually present in the context.\n"
         "Count the information as present only when the context states it explicitly and literally; reject inferences and require explicit matches.\n"
         "Reply in exactly two lines:\n"
         "FINDING: PRESENT or ABSENT\n"
         "EVIDENCE: \"<verbatim quote from the context>\" (leave empty when ABSENT)\n"},

        {template_ids::autorater,
         "You judge whether a context is sufficient to answer a question. Reply with one word: Sufficient or Insufficient.\n"
         "---\n"
         "Example:\n"
         "Question: What year did the first crewed Moon landing take place?\n"
         "Context: Apollo 11 was the American spaceflight that first landed humans on the Moon in July 1969.\n"
         "Answer: Sufficient\n"
         "\n"
         "Question: {question}\n"
         "Context:\n"
         "{passages}\n"
         "Answer:\n"},

        {template_ids::answer_abstain,
         "You answer questions strictly from the provided context.\n"
         "---\n"
         "Context:\n"
         "{passages}\n"
         "\n"
         "Question: {question}\n"
         "\n"
         "Answer the question using only the context above. If the context does not contain the information needed, reply with the word \"unanswerable\" followed by a one-sentence summary of the missing information.\n"},

        {template_ids::filter_context_free,
         "You answer questions from your own knowledge.\n"
         "---\n"
         "Question: {question}\n"
         "Answer concisely.\n"},

        {template_ids::filter_judge,
         "You grade answers for factual correctness.\n"
         "---\n"
         "Question: {question}\n"
         "Reference answer: {gold_answer}\n"
         "Proposed answer: {generated_answer}\n"
         "\n"
         "Compare the proposed answer to the reference answer. Reply with exactly one word:\n"
         "CORRECT if the proposed answer states the same fact as the reference answer,\n"
         "INCORRECT if it contradicts the reference answer,\n"
         "UNCLEAR if you cannot tell.\n"},

        {template_ids::alignment_judge,
         "You rate how well two explanations agree.\n"
         "---\n"
         "Explanation A (system output): {candidate}\n"
         "Explanation B (reference): {reference}\n"
         "\n"
         "Rate how well Explanation A aligns with Explanation B on a scale of 1 to 5:\n"
         "1 - not aligned: completely different and unrelated reasons\n"
         "2 - mostly different: at most a small overlapping detail\n"
         "3 - partially aligned: some shared substance but a different main reason\n"
         "4 - mostly aligned: the same main reason with minor differences\n"
         "5 - perfectly aligned: both state the same reason\n"
         "Reply with a single integer from 1 to 5.\n"},
    };
    return store;
}

} // namespace detail

class TemplateRegistry {
  public:
    /// Registry preloaded with the library's built-in template versions.
    static TemplateRegistry builtin() {
        TemplateRegistry reg;
        for (const auto& [id, text] : detail::builtin_templates()) reg.templates_[id] = text;
        return reg;
    }

    /// Loads every *.txt file under `dir`; the relative path minus extension
    /// becomes the template id and overrides any built-in with that id.
    void load_directory(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) throw IoError("template directory not found: " + dir.string());
        for (const auto& de : std::filesystem::recursive_directory_iterator(dir)) {
            if (!de.is_regular_file() || de.path().extension() != ".txt") continue;
            const std::string id =
                std::filesystem::relative(de.path(), dir).replace_extension("").generic_string();
            std::ifstream in(de.path());
            std::ostringstream ss;
            ss << in.rdbuf();
            templates_[id] = ss.str();
        }
    }

    void put(const std::string& id, std::string text) { templates_[id] = std::move(text); }

    bool has(const std::string& id) const { return templates_.count(id) > 0; }

    const std::string& raw(const std::string& id) const {
        auto it = templates_.find(id);
        if (it == templates_.end()) throw TemplateNotFound("no template with id '" + id + "'");
        return it->second;
    }

    std::string digest(const std::string& id) const { return sha256_hex(raw(id)); }

    /// Renders a template into chat messages. Substitution is single-pass:
    /// placeholder values are inserted verbatim and never re-expanded.
    std::vector<Message> render(const std::string& id, const std::map<std::string, std::string>& values) const {
        const std::string& text = raw(id);
        std::string system_part, user_part;
        const auto lines = split_lines(text);
        size_t sep = lines.size();
        for (size_t i = 0; i < lines.size(); ++i) {
            if (trim(lines[i]) == "---") {
                sep = i;
                break;
            }
        }
        auto join = [](const std::vector<std::string>& ls, size_t from, size_t to) {
            std::string out;
            for (size_t i = from; i < to; ++i) {
                out += ls[i];
                if (i + 1 < to) out += '\n';
            }
            return out;
        };
        if (sep < lines.size()) {
            system_part = join(lines, 0, sep);
            user_part = join(lines, sep + 1, lines.size());
        } else {
            user_part = join(lines, 0, lines.size());
        }

        std::vector<Message> messages;
        const std::string sys = trim(substitute(system_part, values));
        if (!sys.empty()) messages.push_back({"system", sys});
        messages.push_back({"user", trim(substitute(user_part, values))});
        return messages;
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& [id, _] : templates_) out.push_back(id);
        return out;
    }

  private:
    static std::string substitute(const std::string& text, const std::map<std::string, std::string>& values) {
        std::string out;
        out.reserve(text.size());
        size_t i = 0;
        while (i < text.size()) {
            if (text[i] == '{') {
                const size_t close = text.find('}', i + 1);
                if (close != std::string::npos) {
                    const std::string name = text.substr(i + 1, close - i - 1);
                    auto it = values.find(name);
                    if (it != values.end()) {
                        out += it->second;
                        i = close + 1;
                        continue;
                    }
                }
            }
            out.push_back(text[i]);
            ++i;
        }
        return out;
    }

    std::map<std::string, std::string> templates_;
};

} // namespace gapcheck
