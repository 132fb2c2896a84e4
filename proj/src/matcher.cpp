#include "sail/matcher.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "sail/reasoner.hpp"
#include "sail/testcase.hpp"

namespace sail {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {"the", "a",  "an", "to", "of",
                                                "on",  "in", "and", "or"};
    return words;
}

std::set<std::string> tokenize(const std::string& text) {
    std::set<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty() && !stopwords().count(current)) tokens.insert(current);
        current.clear();
    };
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            current += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

double lexical_similarity(const std::string& a, const std::string& b) {
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    if (ta.empty() && tb.empty()) return 1.0;
    size_t inter = 0;
    for (const auto& t : ta)
        if (tb.count(t)) ++inter;
    size_t uni = ta.size() + tb.size() - inter;
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double overlap_score(const std::string& event_desc, const std::string& step_desc) {
    auto te = tokenize(event_desc);
    auto ts = tokenize(step_desc);
    if (ts.empty()) return 0.0;
    size_t inter = 0;
    for (const auto& t : te)
        if (ts.count(t)) ++inter;
    return static_cast<double>(inter) / static_cast<double>(ts.size());
}

RankedResult rank(const MatchQuery& query, const Scorer& scorer) {
    RankedResult result;
    result.scores.reserve(query.candidates.size());
    for (const auto& cand : query.candidates)
        result.scores.push_back(scorer(query.source_description, cand.description));

    result.order.resize(query.candidates.size());
    std::iota(result.order.begin(), result.order.end(), size_t{0});
    std::stable_sort(result.order.begin(), result.order.end(), [&](size_t a, size_t b) {
        return result.scores[a] > result.scores[b];
    });

    if (query.truth_bounds) {
        for (size_t pos = 0; pos < result.order.size(); ++pos) {
            const MatchCandidate& cand = query.candidates[result.order[pos]];
            if (cand.bounds && center_in_bounds(*cand.bounds, *query.truth_bounds)) {
                result.rank_of_truth = static_cast<int>(pos) + 1;
                break;
            }
        }
    }
    return result;
}

double mrr(const std::vector<std::optional<int>>& ranks) {
    if (ranks.empty()) throw EmptyQuerySet("mrr over an empty query set");
    double sum = 0.0;
    for (const auto& r : ranks)
        if (r) sum += 1.0 / static_cast<double>(*r);
    return sum / static_cast<double>(ranks.size());
}

double top1(const std::vector<std::optional<int>>& ranks) {
    if (ranks.empty()) throw EmptyQuerySet("top1 over an empty query set");
    double hits = 0.0;
    for (const auto& r : ranks)
        if (r && *r == 1) hits += 1.0;
    return hits / static_cast<double>(ranks.size());
}

size_t reasoner_pick(const MatchQuery& query, ReasonerSession& session) {
    DecisionRequest req;
    req.kind = DecisionKind::select_event;
    SkillView anchor;
    anchor.name = "match";
    anchor.description = "select the event matching the source event";
    StepView step;
    step.description = query.source_description;
    step.action = query.source_event.action;
    step.value = query.source_event.value;
    step.direction = query.source_event.direction;
    anchor.steps.push_back(std::move(step));
    req.context.current_skill = std::move(anchor);
    req.context.activity = "match-eval";
    for (const auto& cand : query.candidates) req.context.events.push_back(cand.description);

    DecisionReply reply = session.decide(req);
    return *reply.number - 1;
}

std::vector<MatchQuery> load_match_dataset(const Json& doc) {
    reject_unknown_fields(doc, {"queries"}, "");
    const Json& queries = require_field(doc, "queries", "");
    if (!queries.is_array()) throw SchemaError("queries must be an array", "queries");
    if (queries.empty()) throw SchemaError("queries must not be empty", "queries");

    std::vector<MatchQuery> out;
    for (size_t i = 0; i < queries.size(); ++i) {
        std::string path = "queries[" + std::to_string(i) + "]";
        const Json& qdoc = queries[i];
        reject_unknown_fields(qdoc, {"source", "candidates", "truth_bounds"}, path);
        MatchQuery q;
        q.source_event = load_event_doc(require_field(qdoc, "source", path), path + ".source");
        q.source_description = describe_event(q.source_event);
        const Json& cands = require_field(qdoc, "candidates", path);
        if (!cands.is_array() || cands.empty())
            throw SchemaError("candidates must be a non-empty array", path + ".candidates");
        for (size_t c = 0; c < cands.size(); ++c) {
            std::string cpath = path + ".candidates[" + std::to_string(c) + "]";
            MatchCandidate cand;
            cand.event = load_event_doc(cands[c], cpath);
            cand.description = describe_event(cand.event);
            if (cand.event.target && cand.event.target->bounds)
                cand.bounds = cand.event.target->bounds;
            q.candidates.push_back(std::move(cand));
        }
        if (qdoc.contains("truth_bounds")) {
            try {
                q.truth_bounds = Bounds::parse(qdoc["truth_bounds"].get<std::string>());
            } catch (const MalformedDump& e) {
                throw SchemaError(e.what(), path + ".truth_bounds");
            }
        }
        out.push_back(std::move(q));
    }
    return out;
}

} // namespace sail
