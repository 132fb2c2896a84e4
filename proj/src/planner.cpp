#include "sail/planner.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

namespace sail {

namespace {

struct EventChoice {
    UiEvent event;
    std::string description;
};

std::vector<EventChoice> available_events(const UiScreen& screen) {
    std::vector<EventChoice> out;
    for (const UiEvent& e : extract_events(screen))
        out.push_back({e, describe_event(e, screen)});
    return out;
}

std::vector<std::string> descriptions(const std::vector<EventChoice>& events) {
    std::vector<std::string> out;
    out.reserve(events.size());
    for (const auto& e : events) out.push_back(e.description);
    return out;
}

SkillView view_of(const HierarchicalTestCase& h, const Skill& skill) {
    SkillView v;
    v.name = skill.name;
    v.description = skill.description;
    for (const TestStep& step : skill_events(h, skill)) {
        StepView sv;
        sv.description = describe_event(step.event);
        sv.action = step.event.action;
        sv.value = step.event.value;
        sv.direction = step.event.direction;
        v.steps.push_back(std::move(sv));
    }
    return v;
}

// Shared per-run bookkeeping for the reasoner-driven planners.
class Run {
public:
    Run(MigrationTrace& trace, UiDriver& driver, const PlannerConfig& cfg)
        : trace_(trace), driver_(driver), cfg_(cfg) {}

    void record_screen() {
        UiScreen screen = driver_.dump_hierarchy();
        trace_.screen_digests.push_back(screen.raw_digest);
        trace_.activities.push_back(driver_.current_activity());
        current_ = std::move(screen);
    }

    const UiScreen& screen() const { return current_; }

    bool budget_left() const { return trace_.events.size() < cfg_.max_steps; }

    // Step 5 + 6 + 7: perform, append history, re-dump. The recorded
    // description reflects the event as performed, value and direction bound.
    void perform(const EventChoice& choice) {
        std::string description = describe_event(choice.event, current_);
        driver_.perform(choice.event);
        trace_.events.push_back(choice.event);
        trace_.event_descriptions.push_back(description);
        history_.push_back(description);
        record_screen();
    }

    const std::vector<std::string>& history() const { return history_; }

private:
    MigrationTrace& trace_;
    UiDriver& driver_;
    const PlannerConfig& cfg_;
    UiScreen current_;
    std::vector<std::string> history_;
};

void ensure_trace_shape(MigrationTrace& trace) {
    while (trace.screen_digests.size() < trace.events.size() + 1) {
        trace.screen_digests.push_back("unavailable");
        trace.activities.push_back("unavailable");
    }
}

// Fills value/direction on a selected event, asking the reasoner per the
// always-ask policy: the deterministic backends echo the source value, a
// recorded transcript may override it.
void bind_event_details(UiEvent& event, ReasonerSession& session, DecisionContext base_ctx,
                        const std::vector<StepView>& source_steps,
                        const std::optional<SkillView>& current_skill) {
    base_ctx.events.clear();
    base_ctx.source_steps = source_steps;
    base_ctx.current_skill = current_skill;
    if (event.action == Action::input && !event.value) {
        DecisionRequest req{DecisionKind::input_text, base_ctx};
        event.value = session.decide(req).text;
    }
    if (event.action == Action::swipe && !event.direction) {
        DecisionRequest req{DecisionKind::swipe_direction, base_ctx};
        event.direction = session.decide(req).direction;
    }
}

SkillLogEntry& log_entry(MigrationTrace& trace, const std::string& name, size_t event_index) {
    for (auto& entry : trace.skill_log)
        if (entry.name == name) return entry;
    trace.skill_log.push_back({name, event_index, {}, std::nullopt});
    return trace.skill_log.back();
}

} // namespace

std::string to_string(Outcome o) {
    switch (o) {
    case Outcome::goal_reached: return "goal_reached";
    case Outcome::budget_exhausted: return "budget_exhausted";
    case Outcome::incomplete: return "incomplete";
    case Outcome::error: return "error";
    }
    return "error";
}

std::vector<StepView> step_views(const std::vector<TestStep>& steps) {
    std::vector<StepView> out;
    for (const TestStep& step : steps) {
        StepView sv;
        sv.description = describe_event(step.event);
        sv.action = step.event.action;
        sv.value = step.event.value;
        sv.direction = step.event.direction;
        out.push_back(std::move(sv));
    }
    return out;
}

MigrationTrace migrate_sail(const TestCase& source, UiDriver& driver, Reasoner& reasoner,
                            const PlannerConfig& cfg, const SkillHints* hints) {
    MigrationTrace trace;
    trace.test_id = source.id;
    trace.planner = "sail";

    ReasonerSession session(reasoner);
    Run run(trace, driver, cfg);

    try {
        run.record_screen();

        DecisionContext base;
        base.activity = driver.current_activity();
        base.history_window = cfg.history_window;
        base.source_steps = step_views(source.steps);
        if (hints) {
            base.hint_goal = hints->goal;
            base.hint_skills = hints->skills;
        }

        DecisionRequest goal_req{DecisionKind::conclude_goal, base};
        trace.goal = session.decide(goal_req).text;

        DecisionContext divide_ctx = base;
        divide_ctx.goal = trace.goal;
        DecisionRequest divide_req{DecisionKind::divide_skills, divide_ctx};
        std::vector<Skill> partition = session.decide(divide_req).skills;

        HierarchicalTestCase hierarchy = build_hierarchy(source, trace.goal, partition);

        std::vector<Skill> remaining = hierarchy.skills;
        const std::vector<StepView> all_steps = step_views(source.steps);

        for (;;) {
            std::vector<SkillView> remaining_views;
            for (const Skill& s : remaining) remaining_views.push_back(view_of(hierarchy, s));

            DecisionContext goal_ctx;
            goal_ctx.goal = trace.goal;
            goal_ctx.skills = remaining_views;
            goal_ctx.history = run.history();
            goal_ctx.activity = driver.current_activity();
            goal_ctx.history_window = cfg.history_window;
            DecisionRequest finished_req{DecisionKind::goal_finished, goal_ctx};
            if (session.decide(finished_req).decision) {
                trace.outcome = Outcome::goal_reached;
                trace.goal_on_initial_screen = trace.events.empty();
                break;
            }
            if (!run.budget_left()) {
                trace.outcome = Outcome::budget_exhausted;
                trace.outcome_detail = "budget of " + std::to_string(cfg.max_steps) + " steps spent";
                break;
            }

            // Step 2: candidate events from the current hierarchy.
            std::vector<EventChoice> events = available_events(run.screen());

            // Step 3: retrieve the relevant skill.
            DecisionContext retrieve_ctx = goal_ctx;
            retrieve_ctx.events = descriptions(events);
            for (const auto& choice : events)
                retrieve_ctx.event_actions.push_back(choice.event.action);
            DecisionRequest retrieve_req{DecisionKind::retrieve_skill, retrieve_ctx};
            std::optional<size_t> choice = session.decide(retrieve_req).number;

            std::optional<SkillView> current_skill;
            std::optional<size_t> skill_index;
            if (choice) {
                skill_index = *choice - 1;
                current_skill = remaining_views[*skill_index];
            }

            // Step 4: select the event, goal-only when no skill applies.
            DecisionContext select_ctx;
            select_ctx.goal = trace.goal;
            select_ctx.current_skill = current_skill;
            select_ctx.events = descriptions(events);
            select_ctx.history = run.history();
            select_ctx.activity = driver.current_activity();
            select_ctx.history_window = cfg.history_window;
            DecisionRequest select_req{DecisionKind::select_event, select_ctx};
            size_t selected = *session.decide(select_req).number - 1;

            EventChoice chosen = events[selected];
            bind_event_details(chosen.event, session, select_ctx, all_steps, current_skill);

            size_t event_index = trace.events.size();
            run.perform(chosen);

            if (skill_index) {
                SkillLogEntry& entry = log_entry(trace, remaining[*skill_index].name, event_index);
                entry.events.push_back(event_index);

                // Step 8: retire the skill once its steps are covered.
                DecisionContext done_ctx;
                done_ctx.goal = trace.goal;
                done_ctx.current_skill = current_skill;
                done_ctx.history = run.history();
                done_ctx.activity = driver.current_activity();
                done_ctx.history_window = cfg.history_window;
                DecisionRequest done_req{DecisionKind::skill_finished, done_ctx};
                if (session.decide(done_req).decision) {
                    entry.finished_at = event_index;
                    remaining.erase(remaining.begin() + static_cast<long>(*skill_index));
                }
            }
        }
    } catch (const Error& e) {
        trace.outcome = Outcome::error;
        trace.outcome_detail = e.what();
    } catch (const std::exception& e) {
        trace.outcome = Outcome::error;
        trace.outcome_detail = e.what();
    }

    trace.transcript = session.transcript();
    ensure_trace_shape(trace);
    return trace;
}

MigrationTrace migrate_matcher(const TestCase& source, UiDriver& driver, const Scorer& scorer,
                               const PlannerConfig& cfg) {
    MigrationTrace trace;
    trace.test_id = source.id;
    trace.planner = "matcher";

    try {
        UiScreen screen = driver.dump_hierarchy();
        trace.screen_digests.push_back(screen.raw_digest);
        trace.activities.push_back(driver.current_activity());

        bool budget_hit = false;
        for (size_t i = 0; i < source.steps.size(); ++i) {
            if (trace.events.size() >= cfg.max_steps) {
                budget_hit = true;
                break;
            }
            const TestStep& step = source.steps[i];
            std::vector<EventChoice> events = available_events(screen);

            MatchQuery query;
            query.source_event = step.event;
            query.source_description = describe_event(step.event);
            for (const auto& choice : events) {
                MatchCandidate cand;
                cand.event = choice.event;
                cand.description = choice.description;
                if (choice.event.target && choice.event.target->bounds)
                    cand.bounds = choice.event.target->bounds;
                query.candidates.push_back(std::move(cand));
            }

            RankedResult ranked = rank(query, scorer);
            size_t best = ranked.order.front();
            if (ranked.scores[best] < cfg.similarity_threshold) {
                trace.skipped_steps.push_back(i); // counted as an FN for this step
                continue;
            }

            EventChoice chosen = events[best];
            if (chosen.event.action == Action::input && !chosen.event.value)
                chosen.event.value = step.event.value; // source value, verbatim
            if (chosen.event.action == Action::swipe && !chosen.event.direction)
                chosen.event.direction = step.event.direction;

            driver.perform(chosen.event);
            trace.events.push_back(chosen.event);
            trace.event_descriptions.push_back(describe_event(chosen.event, screen));
            screen = driver.dump_hierarchy();
            trace.screen_digests.push_back(screen.raw_digest);
            trace.activities.push_back(driver.current_activity());
        }

        if (budget_hit) {
            trace.outcome = Outcome::budget_exhausted;
            trace.outcome_detail = "budget of " + std::to_string(cfg.max_steps) + " steps spent";
        } else if (!trace.skipped_steps.empty()) {
            trace.outcome = Outcome::incomplete;
            trace.outcome_detail = std::to_string(trace.skipped_steps.size()) +
                                   " source step(s) had no match above threshold";
        } else {
            trace.outcome = Outcome::goal_reached;
        }
    } catch (const Error& e) {
        trace.outcome = Outcome::error;
        trace.outcome_detail = e.what();
    } catch (const std::exception& e) {
        trace.outcome = Outcome::error;
        trace.outcome_detail = e.what();
    }

    ensure_trace_shape(trace);
    return trace;
}

namespace {

// Shared loop for the two ablations; they differ only in the selection
// context and in whether a goal is concluded first.
MigrationTrace migrate_goal_loop(const TestCase& source, UiDriver& driver, Reasoner& reasoner,
                                 const PlannerConfig& cfg, const SkillHints* hints,
                                 bool conclude_goal_first, bool select_with_source) {
    MigrationTrace trace;
    trace.test_id = source.id;
    trace.planner = conclude_goal_first ? "target" : "trace";

    ReasonerSession session(reasoner);
    Run run(trace, driver, cfg);

    try {
        run.record_screen();
        const std::vector<StepView> all_steps = step_views(source.steps);

        if (conclude_goal_first) {
            DecisionContext ctx;
            ctx.activity = driver.current_activity();
            ctx.history_window = cfg.history_window;
            ctx.source_steps = all_steps;
            if (hints) ctx.hint_goal = hints->goal;
            DecisionRequest req{DecisionKind::conclude_goal, ctx};
            trace.goal = session.decide(req).text;
        }

        for (;;) {
            DecisionContext goal_ctx;
            if (!trace.goal.empty()) goal_ctx.goal = trace.goal;
            goal_ctx.source_steps = all_steps;
            goal_ctx.history = run.history();
            goal_ctx.activity = driver.current_activity();
            goal_ctx.history_window = cfg.history_window;
            DecisionRequest finished_req{DecisionKind::goal_finished, goal_ctx};
            if (session.decide(finished_req).decision) {
                trace.outcome = Outcome::goal_reached;
                trace.goal_on_initial_screen = trace.events.empty();
                break;
            }
            if (!run.budget_left()) {
                trace.outcome = Outcome::budget_exhausted;
                trace.outcome_detail = "budget of " + std::to_string(cfg.max_steps) + " steps spent";
                break;
            }

            std::vector<EventChoice> events = available_events(run.screen());

            DecisionContext select_ctx;
            if (!trace.goal.empty()) select_ctx.goal = trace.goal;
            if (select_with_source) select_ctx.source_steps = all_steps;
            select_ctx.events = descriptions(events);
            select_ctx.history = run.history();
            select_ctx.activity = driver.current_activity();
            select_ctx.history_window = cfg.history_window;
            DecisionRequest select_req{DecisionKind::select_event, select_ctx};
            size_t selected = *session.decide(select_req).number - 1;

            EventChoice chosen = events[selected];
            bind_event_details(chosen.event, session, select_ctx, all_steps, std::nullopt);
            run.perform(chosen);
        }
    } catch (const Error& e) {
        trace.outcome = Outcome::error;
        trace.outcome_detail = e.what();
    } catch (const std::exception& e) {
        trace.outcome = Outcome::error;
        trace.outcome_detail = e.what();
    }

    trace.transcript = session.transcript();
    ensure_trace_shape(trace);
    return trace;
}

} // namespace

MigrationTrace migrate_trace_ablation(const TestCase& source, UiDriver& driver,
                                      Reasoner& reasoner, const PlannerConfig& cfg,
                                      const SkillHints* hints) {
    return migrate_goal_loop(source, driver, reasoner, cfg, hints,
                             /*conclude_goal_first=*/false, /*select_with_source=*/true);
}

MigrationTrace migrate_target_ablation(const TestCase& source, UiDriver& driver,
                                       Reasoner& reasoner, const PlannerConfig& cfg,
                                       const SkillHints* hints) {
    return migrate_goal_loop(source, driver, reasoner, cfg, hints,
                             /*conclude_goal_first=*/true, /*select_with_source=*/false);
}

namespace {

bool events_match(const UiEvent& performed, const UiEvent& truth) {
    if (performed.action != truth.action) return false;
    bool performed_has = performed.target.has_value();
    bool truth_has = truth.target.has_value();
    if (performed_has != truth_has) return false;
    if (!performed_has) return true; // back and bare swipes match on action
    if (!performed.target->bounds || !truth.target->bounds) return false;
    return center_in_bounds(*performed.target->bounds, *truth.target->bounds);
}

} // namespace

Classification classify_events(const std::vector<UiEvent>& performed,
                               const std::vector<TestStep>& truth) {
    Classification result;
    std::vector<bool> truth_matched(truth.size(), false);
    for (const UiEvent& ev : performed) {
        bool matched = false;
        for (size_t t = 0; t < truth.size(); ++t) {
            if (events_match(ev, truth[t].event)) {
                matched = true;
                truth_matched[t] = true;
            }
        }
        result.performed.push_back(matched ? StepClass::TP : StepClass::FP);
        if (matched) ++result.tp;
        else ++result.fp;
    }
    for (bool m : truth_matched)
        if (!m) ++result.fn;
    return result;
}

Json trace_to_json(const MigrationTrace& trace) {
    Json doc = Json::object();
    doc["test_id"] = trace.test_id;
    doc["planner"] = trace.planner;
    doc["goal"] = trace.goal;
    doc["outcome"] = to_string(trace.outcome);
    if (!trace.outcome_detail.empty()) doc["outcome_detail"] = trace.outcome_detail;
    doc["goal_on_initial_screen"] = trace.goal_on_initial_screen;

    Json events = Json::array();
    for (size_t i = 0; i < trace.events.size(); ++i) {
        Json e = event_to_json(trace.events[i]);
        e["description"] = trace.event_descriptions[i];
        events.push_back(std::move(e));
    }
    doc["events"] = std::move(events);
    doc["screen_digests"] = trace.screen_digests;
    doc["activities"] = trace.activities;

    Json skills = Json::array();
    for (const auto& entry : trace.skill_log) {
        Json s = Json::object();
        s["name"] = entry.name;
        s["first_event"] = entry.first_event;
        s["events"] = entry.events;
        if (entry.finished_at) s["finished_at"] = *entry.finished_at;
        skills.push_back(std::move(s));
    }
    doc["skill_log"] = std::move(skills);
    if (!trace.skipped_steps.empty()) doc["skipped_steps"] = trace.skipped_steps;
    return doc;
}

void write_trace_report(const MigrationTrace& trace, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/trace.json", trace_to_json(trace).dump(2) + "\n");
    write_text_file(out_dir + "/transcript.jsonl", transcript_to_jsonl(trace.transcript));

    std::ostringstream os;
    os << "test: " << trace.test_id << "\n"
       << "planner: " << trace.planner << "\n"
       << "outcome: " << to_string(trace.outcome);
    if (!trace.outcome_detail.empty()) os << " (" << trace.outcome_detail << ")";
    os << "\n";
    if (!trace.goal.empty()) os << "goal: " << trace.goal << "\n";
    os << "steps:\n";
    for (size_t i = 0; i < trace.event_descriptions.size(); ++i)
        os << "  " << (i + 1) << ". " << trace.event_descriptions[i] << "\n";
    if (!trace.skill_log.empty()) {
        os << "skills:\n";
        for (const auto& entry : trace.skill_log) {
            os << "  " << entry.name << ": " << entry.events.size() << " event(s)";
            if (entry.finished_at) os << ", finished";
            os << "\n";
        }
    }
    write_text_file(out_dir + "/summary.txt", os.str());
}

} // namespace sail
