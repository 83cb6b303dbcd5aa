#pragma once

// Step 2a: embed gap claims, build the cosine-similarity matrix, select the
// consensus claim as the medoid, and apply the uncertainty-threshold
// fallback. Also computes the disagreement-rate statistic over repeated
// polarity judgments.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcheck/errors.hpp"
#include "gapcheck/gateway.hpp"
#include "gapcheck/identify.hpp"

namespace gapcheck {

enum class ConsensusDecision { gap_claim, no_gap, uncertain_fallback };

inline const char* to_string(ConsensusDecision d) {
    switch (d) {
        case ConsensusDecision::gap_claim: return "GAP_CLAIM";
        case ConsensusDecision::no_gap: return "NO_GAP";
        default: return "UNCERTAIN_FALLBACK";
    }
}

inline ConsensusDecision consensus_decision_from_string(const std::string& s) {
    if (s == "GAP_CLAIM") return ConsensusDecision::gap_claim;
    if (s == "NO_GAP") return ConsensusDecision::no_gap;
    if (s == "UNCERTAIN_FALLBACK") return ConsensusDecision::uncertain_fallback;
    throw ParseError("unknown consensus decision '" + s + "'");
}

struct ConsensusConfig {
    // Minimum mean similarity the medoid must reach before its claim counts
    // as the consensus; below it the outcome falls back to uncertain.
    double similarity_threshold = 0.55;
    std::string embedding_model_id;

    void validate() const {
        if (similarity_threshold < -1.0 || similarity_threshold > 1.0)
            throw ContractViolation("ConsensusConfig: similarity_threshold must be in [-1, 1]");
    }
};

struct ConsensusOutcome {
    ConsensusDecision decision = ConsensusDecision::no_gap;
    std::string claim; // non-empty iff decision == gap_claim
    std::optional<int> medoid_index;
    std::optional<double> mean_similarity;
    std::vector<std::vector<double>> similarity_matrix;
    std::vector<int> gap_sample_indices; // sample_index of each embedded claim
    bool matrix_elided = false;          // matrices above 16x16 are not serialized
};

// Matrices above this edge length are dropped from serialized provenance.
inline constexpr size_t kMaxSerializedMatrix = 16;

inline void to_json(json& j, const ConsensusOutcome& c) {
    j = json{{"decision", to_string(c.decision)},
             {"claim", c.claim},
             {"gap_sample_indices", c.gap_sample_indices}};
    if (c.medoid_index) j["medoid_index"] = *c.medoid_index;
    if (c.mean_similarity) j["mean_similarity"] = *c.mean_similarity;
    if (c.similarity_matrix.size() > kMaxSerializedMatrix || c.matrix_elided) {
        j["matrix_elided"] = true;
    } else {
        j["similarity_matrix"] = c.similarity_matrix;
    }
}

inline void from_json(const json& j, ConsensusOutcome& c) {
    c.decision = consensus_decision_from_string(j.at("decision").get<std::string>());
    c.claim = j.value("claim", "");
    if (j.contains("gap_sample_indices")) c.gap_sample_indices = j.at("gap_sample_indices").get<std::vector<int>>();
    if (j.contains("medoid_index")) c.medoid_index = j.at("medoid_index").get<int>();
    if (j.contains("mean_similarity")) c.mean_similarity = j.at("mean_similarity").get<double>();
    if (j.contains("similarity_matrix"))
        c.similarity_matrix = j.at("similarity_matrix").get<std::vector<std::vector<double>>>();
    c.matrix_elided = j.value("matrix_elided", false);
}

// ---------------------------------------------------------------------------
// Similarity math
// ---------------------------------------------------------------------------

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw DimensionMismatch("cosine: dimensions differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
    if (a.empty()) throw DimensionMismatch("cosine: empty vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine: zero-norm vector");
    const double value = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::min(1.0, std::max(-1.0, value));
}

/// S[i][j] = cosine(v_i, v_j); symmetric with a unit diagonal.
inline std::vector<std::vector<double>> similarity_matrix(const std::vector<std::vector<double>>& vectors) {
    if (vectors.empty()) throw EmptyMatrix("similarity_matrix: no vectors");
    const size_t n = vectors.size();
    std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        s[i][i] = 1.0;
        for (size_t j = i + 1; j < n; ++j) {
            const double v = cosine(vectors[i], vectors[j]);
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    return s;
}

namespace detail {

inline void validate_similarity_matrix(const std::vector<std::vector<double>>& s) {
    const size_t n = s.size();
    constexpr double tol = 1e-9;
    for (size_t i = 0; i < n; ++i) {
        if (s[i].size() != n) throw ContractViolation("similarity matrix is not square");
        if (std::fabs(s[i][i] - 1.0) > tol) throw ContractViolation("similarity matrix diagonal entry != 1");
        for (size_t j = 0; j < n; ++j) {
            if (std::fabs(s[i][j]) > 1.0 + tol) throw ContractViolation("similarity matrix entry out of [-1, 1]");
            if (std::fabs(s[i][j] - s[j][i]) > tol) throw ContractViolation("similarity matrix not symmetric");
        }
    }
}

} // namespace detail

/// The hypothesis with the highest mean similarity to all others wins;
/// self-similarity is excluded from the mean so the value is comparable
/// against the threshold. Ties break to the lowest index. A 1x1 matrix
/// yields (0, 1.0) by definition.
inline std::pair<int, double> select_medoid(const std::vector<std::vector<double>>& s) {
    if (s.empty()) throw EmptyMatrix("select_medoid: empty matrix");
    detail::validate_similarity_matrix(s);
    const size_t n = s.size();
    if (n == 1) return {0, 1.0};
    int best = 0;
    double best_mean = -2.0;
    for (size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (size_t j = 0; j < n; ++j)
            if (j != i) sum += s[i][j];
        const double mean = sum / static_cast<double>(n - 1);
        if (mean > best_mean) {
            best_mean = mean;
            best = static_cast<int>(i);
        }
    }
    return {best, best_mean};
}

// ---------------------------------------------------------------------------
// Consensus
// ---------------------------------------------------------------------------

/// Polarity vote first: strictly more than half NO_GAP short-circuits to a
/// NO_GAP outcome with no embedding. Otherwise only the GAP statements are
/// embedded; the medoid claim becomes the consensus when its mean similarity
/// clears the threshold, else the outcome is the uncertain fallback.
inline ConsensusOutcome establish_consensus(const std::vector<GapHypothesis>& hypotheses,
                                            const ConsensusConfig& cfg, Gateway& gateway) {
    cfg.validate();
    if (hypotheses.empty()) throw ContractViolation("establish_consensus: need at least one hypothesis");

    ConsensusOutcome outcome;
    size_t no_gap = 0;
    for (const auto& h : hypotheses)
        if (h.polarity == Polarity::no_gap) ++no_gap;
    if (2 * no_gap > hypotheses.size()) {
        outcome.decision = ConsensusDecision::no_gap;
        return outcome;
    }

    std::vector<std::string> statements;
    for (const auto& h : hypotheses) {
        if (h.polarity == Polarity::gap) {
            statements.push_back(h.gap_statement);
            outcome.gap_sample_indices.push_back(h.sample_index);
        }
    }

    const auto vectors = gateway.embed(statements, cfg.embedding_model_id);
    outcome.similarity_matrix = similarity_matrix(vectors);
    const auto [medoid, mean] = select_medoid(outcome.similarity_matrix);
    outcome.medoid_index = medoid;
    outcome.mean_similarity = mean;
    if (mean >= cfg.similarity_threshold) {
        outcome.decision = ConsensusDecision::gap_claim;
        outcome.claim = statements[static_cast<size_t>(medoid)];
    } else {
        outcome.decision = ConsensusDecision::uncertain_fallback;
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Disagreement rate
// ---------------------------------------------------------------------------

/// Percentage of instances whose first k polarity judgments are not all
/// identical. A single judgment (k = 1) can never conflict.
inline double disagreement_rate(const std::vector<std::vector<Polarity>>& polarity_runs, int k) {
    if (k < 1) throw InsufficientRuns("disagreement_rate: k must be >= 1");
    if (polarity_runs.empty()) throw InsufficientRuns("disagreement_rate: no instances");
    size_t conflicting = 0;
    for (const auto& runs : polarity_runs) {
        if (runs.size() < static_cast<size_t>(k))
            throw InsufficientRuns("disagreement_rate: an instance has fewer than k recorded runs");
        for (int i = 1; i < k; ++i) {
            if (runs[static_cast<size_t>(i)] != runs[0]) {
                ++conflicting;
                break;
            }
        }
    }
    return 100.0 * static_cast<double>(conflicting) / static_cast<double>(polarity_runs.size());
}

} // namespace gapcheck
