#pragma once

// Test-side oracles: independent restatements of documented formulas, kept
// deliberately separate from the library implementation they check.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace oracles {

// The mock embedder formula, re-derived from its documentation.
inline std::vector<double> embed(const std::string& text, int dim) {
    auto fnv = [](const std::string& s) {
        uint64_t h = 14695981039346656037ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    };
    std::string lowered;
    for (char c : text) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : lowered) {
        if (std::isalnum(c) || c >= 0x80) cur.push_back(static_cast<char>(c));
        else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    if (tokens.empty()) {
        std::string whole = lowered;
        while (!whole.empty() && std::isspace(static_cast<unsigned char>(whole.front()))) whole.erase(whole.begin());
        while (!whole.empty() && std::isspace(static_cast<unsigned char>(whole.back()))) whole.pop_back();
        tokens.push_back(whole);
    }
    std::vector<double> v(static_cast<size_t>(dim), 0.0);
    for (const auto& t : tokens) v[fnv(t) % static_cast<uint64_t>(dim)] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<std::vector<double>> matrix(const std::vector<std::vector<double>>& vectors) {
    const size_t n = vectors.size();
    std::vector<std::vector<double>> s(n, std::vector<double>(n, 1.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) s[i][j] = i == j ? 1.0 : cosine(vectors[i], vectors[j]);
    return s;
}

// Exhaustive medoid: argmax over mean off-diagonal row entries, first index
// wins ties. Same summation order as a plain ascending loop.
inline std::pair<int, double> medoid(const std::vector<std::vector<double>>& s) {
    const size_t n = s.size();
    if (n == 1) return {0, 1.0};
    int best = -1;
    double best_mean = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (size_t j = 0; j < n; ++j)
            if (j != i) sum += s[i][j];
        const double mean = sum / static_cast<double>(n - 1);
        if (best < 0 || mean > best_mean) {
            best_mean = mean;
            best = static_cast<int>(i);
        }
    }
    return {best, best_mean};
}

// Enumeration oracle for the disagreement rate: share of instances whose
// first k entries differ anywhere, times 100.
template <typename Polarity>
inline double disagreement(const std::vector<std::vector<Polarity>>& runs, int k) {
    size_t conflicting = 0;
    for (const auto& r : runs) {
        bool conflict = false;
        for (int i = 0; i < k && !conflict; ++i)
            for (int j = i + 1; j < k && !conflict; ++j)
                if (r[static_cast<size_t>(i)] != r[static_cast<size_t>(j)]) conflict = true;
        if (conflict) ++conflicting;
    }
    return 100.0 * static_cast<double>(conflicting) / static_cast<double>(runs.size());
}

} // namespace oracles
