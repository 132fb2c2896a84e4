#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sail/json_util.hpp"
#include "sail/ui_model.hpp"

namespace sail {

class ReasonerSession;

// Lowercased tokens split on non-alphanumerics with the fixed stopword list
// removed. This tokenization backs both the lexical scorer and the heuristic
// reasoner rules, so it is part of the observable contract.
std::set<std::string> tokenize(const std::string& text);

// Versioned stopword list: {the, a, an, to, of, on, in, and, or}.
const std::set<std::string>& stopwords();

// Jaccard similarity over token sets. Symmetric; equal multisets score 1.0;
// disjoint sets 0.0; empty vs empty is defined as 1.0.
double lexical_similarity(const std::string& a, const std::string& b);

// Directed overlap used by the heuristic reasoner:
//   |tokens(event) ∩ tokens(step)| / |tokens(step)|
// Empty step tokens score 0.
double overlap_score(const std::string& event_desc, const std::string& step_desc);

struct MatchCandidate {
    UiEvent event;
    std::string description;
    std::optional<Bounds> bounds;
};

struct MatchQuery {
    UiEvent source_event;
    std::string source_description;
    std::vector<MatchCandidate> candidates;
    std::optional<Bounds> truth_bounds;
};

struct RankedResult {
    std::vector<double> scores;       // one per candidate, [0,1]
    std::vector<size_t> order;        // candidate indices by descending score
    std::optional<int> rank_of_truth; // 1-based rank of the first truth hit
};

using Scorer = std::function<double(const std::string&, const std::string&)>;

// Ties break toward the lower candidate index. rank_of_truth is the 1-based
// position in `order` of the first candidate whose center lies within
// truth_bounds; absent when no candidate qualifies.
RankedResult rank(const MatchQuery& query, const Scorer& scorer);

// Eq-style metrics over optional 1-based ranks. Absent ranks contribute a
// reciprocal of zero rather than being dropped. Empty input is an error.
double mrr(const std::vector<std::optional<int>>& ranks);
double top1(const std::vector<std::optional<int>>& ranks);

// Asks the reasoner to select among the candidates. Returns the chosen
// 0-based candidate index; reasoner errors propagate.
size_t reasoner_pick(const MatchQuery& query, ReasonerSession& session);

struct MatchReport {
    size_t n = 0;
    double top1 = 0.0;
    std::optional<double> mrr;
};

// Match dataset document: {"queries":[{"source":…, "candidates":[…], "truth_bounds":…}]}.
std::vector<MatchQuery> load_match_dataset(const Json& doc);

} // namespace sail
