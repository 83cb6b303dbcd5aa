#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace gapcheck {

inline bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && is_space_byte(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space_byte(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

/// Collapses every whitespace run to a single space and trims the ends.
/// This is the normalization used for evidence-quote matching.
inline std::string normalize_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (unsigned char c : s) {
        if (is_space_byte(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Case-insensitive substring test (ASCII).
inline bool icontains(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    const std::string h = to_lower(haystack);
    const std::string n = to_lower(needle);
    return h.find(n) != std::string::npos;
}

inline bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_';
}

/// Case-insensitive whole-word search; "correct" does not match inside "incorrect".
inline bool contains_word_ci(std::string_view text, std::string_view word) {
    if (word.empty()) return false;
    const std::string h = to_lower(text);
    const std::string n = to_lower(word);
    size_t pos = 0;
    while ((pos = h.find(n, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_byte(static_cast<unsigned char>(h[pos - 1]));
        const size_t end = pos + n.size();
        const bool right_ok = end == h.size() || !is_word_byte(static_cast<unsigned char>(h[end]));
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

/// Cuts a string down to its first sentence. A '.', '!' or '?' ends a sentence
/// only when followed by whitespace or end-of-string, so decimals like 43.1
/// survive. Input is whitespace-normalized first; the terminator is kept.
inline std::string first_sentence(std::string_view s) {
    const std::string t = normalize_ws(s);
    for (size_t i = 0; i < t.size(); ++i) {
        const char c = t[i];
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == t.size() || is_space_byte(static_cast<unsigned char>(t[i + 1])))) {
            return t.substr(0, i + 1);
        }
    }
    return t;
}

/// Removes one layer of surrounding quotation marks, straight or typographic.
inline std::string strip_quotes(std::string_view s) {
    std::string t = trim(s);
    static const std::vector<std::pair<std::string, std::string>> pairs = {
        {"\"", "\""}, {"'", "'"}, {"“", "”"}, {"‘", "’"}, {"«", "»"},
    };
    for (const auto& [open, close] : pairs) {
        if (t.size() >= open.size() + close.size() && t.rfind(open, 0) == 0 &&
            t.compare(t.size() - close.size(), close.size(), close) == 0) {
            return trim(t.substr(open.size(), t.size() - open.size() - close.size()));
        }
    }
    return t;
}

inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '\n') {
            std::string line(s.substr(start, i - start));
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(std::move(line));
            start = i + 1;
        }
    }
    return lines;
}

} // namespace gapcheck
