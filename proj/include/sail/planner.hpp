#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sail/driver.hpp"
#include "sail/json_util.hpp"
#include "sail/matcher.hpp"
#include "sail/reasoner.hpp"
#include "sail/testcase.hpp"

namespace sail {

enum class Outcome {
    goal_reached,     // loop finished believing the goal is done
    budget_exhausted, // hit max_steps
    incomplete,       // matcher baseline skipped source steps
    error,            // driver or reasoner infrastructure failure
};

std::string to_string(Outcome o);

struct PlannerConfig {
    size_t max_steps = 25;
    double similarity_threshold = 0.4; // matcher baseline tau
    double theta_skill = 0.2;
    double theta_done = 0.5;
    int history_window = 10;
};

// Authored goal/skill decomposition shipped alongside a source test. Passed
// into prompts' context for deterministic backends; an LLM backend authors
// its own.
struct SkillHints {
    std::optional<std::string> goal;
    std::vector<Skill> skills;
};

struct SkillLogEntry {
    std::string name;
    size_t first_event = 0;            // trace event index of first use
    std::vector<size_t> events;        // trace event indices run under this skill
    std::optional<size_t> finished_at; // trace event index after which it completed
};

struct MigrationTrace {
    std::string test_id;
    std::string planner;
    std::string goal;
    std::vector<UiEvent> events;
    std::vector<std::string> event_descriptions;
    std::vector<std::string> screen_digests; // |events| + 1, initial screen included
    std::vector<std::string> activities;     // aligned with screen_digests
    std::vector<SkillLogEntry> skill_log;    // order of first retrieval
    std::vector<size_t> skipped_steps;       // matcher baseline: source steps with no match
    Transcript transcript;
    Outcome outcome = Outcome::error;
    std::string outcome_detail;
    bool goal_on_initial_screen = false;
};

// The main skill-adaptive loop: conclude goal, divide skills, then per
// iteration check the goal, extract events, retrieve a skill, select and
// perform an event, and retire the skill once its steps are covered.
// In-app failures land in the outcome field; only programming errors throw.
MigrationTrace migrate_sail(const TestCase& source, UiDriver& driver, Reasoner& reasoner,
                            const PlannerConfig& cfg, const SkillHints* hints = nullptr);

// Sequential similarity baseline: walk the source steps in order, perform
// the best-scoring candidate when it clears the threshold, skip otherwise.
// No goal or skill reasoning, no exploration.
MigrationTrace migrate_matcher(const TestCase& source, UiDriver& driver, const Scorer& scorer,
                               const PlannerConfig& cfg);

// Ablation: whole source test as selection context, no goal/skill split.
MigrationTrace migrate_trace_ablation(const TestCase& source, UiDriver& driver,
                                      Reasoner& reasoner, const PlannerConfig& cfg,
                                      const SkillHints* hints = nullptr);

// Ablation: goal comprehension only, no skills.
MigrationTrace migrate_target_ablation(const TestCase& source, UiDriver& driver,
                                       Reasoner& reasoner, const PlannerConfig& cfg,
                                       const SkillHints* hints = nullptr);

enum class StepClass { TP, FP, FN };

struct Classification {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    std::vector<StepClass> performed; // one per performed event
};

// Per-event comparison against ground-truth target events: a performed event
// is a TP when its action matches a truth event and its target center lies
// within the truth bounds; unmatched performed events are FPs; truth events
// never matched are FNs.
Classification classify_events(const std::vector<UiEvent>& performed,
                               const std::vector<TestStep>& truth);

Json trace_to_json(const MigrationTrace& trace);

// Report directory: trace.json, transcript.jsonl, summary.txt.
void write_trace_report(const MigrationTrace& trace, const std::string& out_dir);

// Described step views for prompts/backends, built from a run of test steps.
std::vector<StepView> step_views(const std::vector<TestStep>& steps);

} // namespace sail
