#pragma once

#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sail/json_util.hpp"
#include "sail/testcase.hpp"
#include "sail/ui_model.hpp"

namespace sail {

enum class DecisionKind {
    conclude_goal,
    divide_skills,
    retrieve_skill,
    select_event,
    skill_finished,
    goal_finished,
    swipe_direction,
    input_text,
};

std::string to_string(DecisionKind k);
DecisionKind decision_kind_from_string(const std::string& s);

// A described source step, with the raw value/direction kept so backends can
// echo them into input_text / swipe_direction replies.
struct StepView {
    std::string description;
    Action action = Action::click;
    std::optional<std::string> value;
    std::optional<SwipeDirection> direction;
};

struct SkillView {
    std::string name;
    std::string description;
    std::vector<StepView> steps;
};

struct DecisionContext {
    std::optional<std::string> goal;
    std::vector<SkillView> skills;          // remaining skills
    std::optional<SkillView> current_skill; // skill guiding event selection
    std::vector<StepView> source_steps;     // whole-test context
    std::vector<std::string> events;        // described available events, prompt order
    std::vector<Action> event_actions;      // parallel to events when known
    std::vector<std::string> history;       // described performed events, full
    std::string activity;
    int history_window = 10;                // prompt tail size

    // Authored goal/skill fixtures carried alongside a source test. Rendered
    // prompts never include them; deterministic backends may honor them.
    std::optional<std::string> hint_goal;
    std::vector<Skill> hint_skills;
};

struct DecisionRequest {
    DecisionKind kind = DecisionKind::select_event;
    DecisionContext context;
};

// Payload matching the request kind. Event and skill numbers use the same
// 1-based numbering the prompts show; retrieve_skill uses nullopt for NONE.
struct DecisionReply {
    DecisionKind kind = DecisionKind::select_event;
    std::string text;                       // conclude_goal, input_text
    std::vector<Skill> skills;              // divide_skills
    std::optional<size_t> number;           // retrieve_skill, select_event
    bool decision = false;                  // skill_finished, goal_finished
    SwipeDirection direction = SwipeDirection::down; // swipe_direction
};

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct TranscriptRecord {
    DecisionKind kind = DecisionKind::select_event;
    std::string prompt;
    std::string raw;
    std::optional<DecisionReply> reply;
    long latency_ms = 0;
    std::optional<TokenUsage> tokens;
};

using Transcript = std::vector<TranscriptRecord>;

std::string transcript_to_jsonl(const Transcript& t);
Transcript transcript_from_jsonl(const std::string& text);

// Deterministic prompt template. Slots, in order: role preamble, goal,
// source-test steps, current-skill block, activity, numbered available
// events (1-based), history tail (last `history_window` steps), and a
// kind-specific output-format instruction.
std::string render_prompt(const DecisionRequest& req);

// The numbered event list exactly as prompts render it.
std::string render_event_list(const std::vector<std::string>& events);

// Grammar per kind: YES/NO with surrounding prose for boolean kinds, first
// standalone integer for index kinds (NONE accepted for retrieve_skill),
// `SKILL <name>: <lo>-<hi>` lines for partitions, a direction token for
// swipe_direction, trimmed text otherwise. Throws UnparseableReply.
DecisionReply parse_reply(DecisionKind kind, const std::string& raw);

class Reasoner {
public:
    virtual ~Reasoner() = default;

    // Produces the full decision record; implementations are safe for use by
    // independent sessions unless documented otherwise.
    virtual TranscriptRecord decide(const DecisionRequest& req) = 0;
};

// Owns the transcript of one migration session. Validates reply kinds and
// index ranges before handing replies out.
class ReasonerSession {
public:
    explicit ReasonerSession(Reasoner& backend) : backend_(backend) {}

    DecisionReply decide(const DecisionRequest& req);
    const Transcript& transcript() const { return transcript_; }

private:
    Reasoner& backend_;
    Transcript transcript_;
};

struct HeuristicConfig {
    double theta_skill = 0.2; // retrieve_skill floor
    double theta_done = 0.5;  // per-step completion threshold
};

// Deterministic rule-based backend. Identical requests yield identical
// replies; no state is kept between calls.
class HeuristicReasoner : public Reasoner {
public:
    HeuristicReasoner() = default;
    explicit HeuristicReasoner(HeuristicConfig cfg) : cfg_(cfg) {}

    TranscriptRecord decide(const DecisionRequest& req) override;

private:
    HeuristicConfig cfg_;
};

// Replays a recorded transcript. Single-session by nature: one cursor, one
// consumer. Prefers the recorded parsed reply; falls back to re-parsing the
// raw text when a record carries none.
class ReplayReasoner : public Reasoner {
public:
    explicit ReplayReasoner(Transcript records) : records_(std::move(records)) {}

    TranscriptRecord decide(const DecisionRequest& req) override;

private:
    Transcript records_;
    size_t cursor_ = 0;
};

struct RemoteConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8080
    std::string api_key;   // sent as Authorization: Bearer …
    std::string model = "gpt-4o-mini";
    int max_attempts = 3;
    int retry_delay_ms = 200;

    // Reads SAIL_REASONER_URL / SAIL_REASONER_API_KEY / SAIL_REASONER_MODEL.
    static RemoteConfig from_env();
};

// Chat-completion client (temperature pinned to 0). Transport failures are
// retried max_attempts times, then raise BackendUnavailable. An unparseable
// reply is retried once with a reformat nudge, then raises UnparseableReply.
class RemoteReasoner : public Reasoner {
public:
    explicit RemoteReasoner(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

    TranscriptRecord decide(const DecisionRequest& req) override;

private:
    struct Exchange {
        std::string raw;
        long latency_ms = 0;
        std::optional<TokenUsage> tokens;
    };
    Exchange post_chat(const std::string& prompt);

    RemoteConfig cfg_;
};

// --- Vision descriptions ----------------------------------------------------

class VisionProvider {
public:
    virtual ~VisionProvider() = default;
    virtual std::string describe(const UiElement& element) = 0;
};

// Table-backed provider keyed by element hash.
class FixtureVisionProvider : public VisionProvider {
public:
    explicit FixtureVisionProvider(std::unordered_map<std::string, std::string> table)
        : table_(std::move(table)) {}

    std::string describe(const UiElement& element) override;

private:
    std::unordered_map<std::string, std::string> table_;
};

// Concurrent get-or-insert cache with at-most-once computation per key.
// Failed computations are not cached.
class DescriptionCache {
public:
    std::string get_or_compute(const std::string& key,
                               const std::function<std::string()>& compute);
    size_t size() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_future<std::string>> entries_;
};

// Cache-backed lookup of the visual description for a description-less
// element. Precondition: the element has neither text nor content_desc.
std::string describe_element_visual(const UiElement& element, VisionProvider& provider,
                                    DescriptionCache& cache);

// Copy of the screen with vision_desc injected into event-yielding elements
// that lack any textual identity.
UiScreen enrich_screen(const UiScreen& screen, VisionProvider& provider,
                       DescriptionCache& cache);

} // namespace sail
