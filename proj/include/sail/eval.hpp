#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sail/json_util.hpp"
#include "sail/planner.hpp"
#include "sail/sim_env.hpp"
#include "sail/testcase.hpp"

namespace sail {

// Matcher over performed trace events. Populated fields must all hold.
struct EventPattern {
    Action action = Action::click;
    std::optional<ElementRef> target; // field-subset match against the performed ref
    std::optional<std::string> value;
};

struct OracleCheck {
    enum class Kind {
        state_equals,
        visited_screen,
        final_screen,
        event_performed,
        ordered,
        max_events,
    };

    Kind kind = Kind::state_equals;
    std::string variable;        // state_equals
    SimValue expected;           // state_equals
    std::string screen;          // visited_screen, final_screen
    EventPattern event;          // event_performed
    EventPattern before, after;  // ordered
    size_t max_events = 0;       // max_events

    std::string label() const;
};

struct Oracle {
    std::string test_id;
    std::vector<OracleCheck> checks; // conjunction
};

Oracle load_oracle(const Json& doc);
Oracle load_oracle_file(const std::string& path);

struct Verdict {
    bool pass = false;
    std::string detail; // first failing check when !pass
};

// Pure over (trace, final session state). Budget and infrastructure outcomes
// fail regardless of the checks; incomplete traces are still evaluated.
// Throws OracleMismatch when a check references unknown vars or screens.
Verdict judge(const Oracle& oracle, const MigrationTrace& trace, const DriverSession& session);

double success_rate(const std::vector<Verdict>& verdicts); // throws EmptySuite

struct PrfStats {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// 0/0 is defined as 0 for every component.
PrfStats precision_recall(int tp, int fp, int fn);

struct SuitePair {
    std::string source_test;
    std::string target_app;
    std::string oracle;
    std::optional<std::string> truth; // ground-truth target events, enables P/R/F1
    std::string mapping;              // "1to1" | "non1to1"
    std::string taxonomy;             // "extra" | "missing" | "reversed" | "plain"
};

struct SuiteManifest {
    std::vector<SuitePair> pairs;
    std::string base_dir; // manifest directory; pair paths resolve against it
};

SuiteManifest load_suite_manifest(const std::string& path);

struct PairResult {
    std::string planner;
    std::string reasoner;
    std::string pair_id;
    std::string mapping;
    std::string taxonomy;
    Outcome outcome = Outcome::error;
    bool pass = false;
    std::string detail;
    size_t event_count = 0;
    std::optional<PrfStats> prf;
};

struct ApproachStats {
    std::string planner;
    std::string reasoner;
    int total = 0;
    int passes = 0;
    double overall_sr = 0.0;
    double one_to_one_sr = 0.0;
    double non_one_to_one_sr = 0.0;
    std::map<std::string, int> failure_taxonomy; // extra/missing/reversed/other
};

struct SuiteReport {
    std::vector<PairResult> pairs;
    std::vector<ApproachStats> approaches;
};

// Runs every (planner, reasoner, pair) combination. Planner names:
// sail|trace|target|matcher. Reasoner names: heuristic|remote. Per-pair
// failures are recorded and the suite continues; configuration problems
// (unknown names, empty suite) throw before anything runs. Results are
// identical regardless of `jobs`.
SuiteReport run_suite(const SuiteManifest& manifest, const std::vector<std::string>& planners,
                      const std::vector<std::string>& reasoners, const PlannerConfig& cfg,
                      int jobs = 1);

Json suite_report_to_json(const SuiteReport& report);
std::string suite_report_to_markdown(const SuiteReport& report);
void write_suite_report(const SuiteReport& report, const std::string& out_dir);

// Loads the authored goal/skill hints stored alongside a test document
// (<name>.hierarchy.json), when present.
std::optional<SkillHints> load_hints_for(const std::string& test_path, const TestCase& tc);

// One migration of `source` onto `app` with the named planner/reasoner.
// Used by the CLI and the suite runner.
struct MigrationRun {
    MigrationTrace trace;
    Verdict verdict;          // meaningful when an oracle was supplied
    bool judged = false;
};

MigrationRun run_pair(const std::string& planner_name, const std::string& reasoner_name,
                      const TestCase& source, const SkillHints* hints, const SimApp& app,
                      const Oracle* oracle, const PlannerConfig& cfg);

} // namespace sail
