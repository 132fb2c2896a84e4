#include "sail/eval.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <sstream>
#include <thread>

namespace sail {

namespace {

namespace fs = std::filesystem;

EventPattern pattern_from_json(const Json& doc, const std::string& path) {
    reject_unknown_fields(doc, {"action", "target", "value"}, path);
    EventPattern p;
    p.action = action_from_string(require_string(doc, "action", path));
    if (doc.contains("target")) {
        const Json& t = doc["target"];
        reject_unknown_fields(t, {"resource_id", "text", "content_desc", "class_role"},
                              path + ".target");
        ElementRef ref;
        if (t.contains("resource_id")) ref.resource_id = t["resource_id"].get<std::string>();
        if (t.contains("text")) ref.text = t["text"].get<std::string>();
        if (t.contains("content_desc")) ref.content_desc = t["content_desc"].get<std::string>();
        if (t.contains("class_role")) ref.class_role = t["class_role"].get<std::string>();
        p.target = ref;
    }
    if (doc.contains("value")) p.value = doc["value"].get<std::string>();
    return p;
}

bool pattern_matches(const EventPattern& pattern, const UiEvent& event) {
    if (pattern.action != event.action) return false;
    if (pattern.value && event.value != pattern.value) return false;
    if (pattern.target) {
        if (!event.target) return false;
        const ElementRef& want = *pattern.target;
        const ElementRef& have = *event.target;
        if (want.resource_id && have.resource_id != want.resource_id) return false;
        if (want.text && have.text != want.text) return false;
        if (want.content_desc && have.content_desc != want.content_desc) return false;
        if (want.class_role && have.class_role != want.class_role) return false;
    }
    return true;
}

std::optional<size_t> first_match(const EventPattern& pattern,
                                  const std::vector<UiEvent>& events) {
    for (size_t i = 0; i < events.size(); ++i)
        if (pattern_matches(pattern, events[i])) return i;
    return std::nullopt;
}

std::string pattern_label(const EventPattern& p) {
    UiEvent e;
    e.action = p.action;
    e.target = p.target;
    e.value = p.value;
    return describe_event(e);
}

} // namespace

std::string OracleCheck::label() const {
    switch (kind) {
    case Kind::state_equals: return "state_equals(" + variable + "," + expected.render() + ")";
    case Kind::visited_screen: return "visited_screen(" + screen + ")";
    case Kind::final_screen: return "final_screen(" + screen + ")";
    case Kind::event_performed: return "event_performed(" + pattern_label(event) + ")";
    case Kind::ordered:
        return "ordered(" + pattern_label(before) + " before " + pattern_label(after) + ")";
    case Kind::max_events: return "max_events(" + std::to_string(max_events) + ")";
    }
    return "check";
}

Oracle load_oracle(const Json& doc) {
    reject_unknown_fields(doc, {"test_id", "checks"}, "");
    Oracle oracle;
    if (doc.contains("test_id")) oracle.test_id = doc["test_id"].get<std::string>();
    const Json& checks = require_field(doc, "checks", "");
    if (!checks.is_array() || checks.empty())
        throw SchemaError("checks must be a non-empty array", "checks");
    for (size_t i = 0; i < checks.size(); ++i) {
        std::string path = "checks[" + std::to_string(i) + "]";
        const Json& cdoc = checks[i];
        std::string kind = require_string(cdoc, "kind", path);
        OracleCheck check;
        if (kind == "state_equals") {
            reject_unknown_fields(cdoc, {"kind", "var", "value"}, path);
            check.kind = OracleCheck::Kind::state_equals;
            check.variable = require_string(cdoc, "var", path);
            check.expected = SimValue::from_json(require_field(cdoc, "value", path), path);
        } else if (kind == "visited_screen" || kind == "final_screen") {
            reject_unknown_fields(cdoc, {"kind", "screen"}, path);
            check.kind = kind == "visited_screen" ? OracleCheck::Kind::visited_screen
                                                  : OracleCheck::Kind::final_screen;
            check.screen = require_string(cdoc, "screen", path);
        } else if (kind == "event_performed") {
            reject_unknown_fields(cdoc, {"kind", "event"}, path);
            check.kind = OracleCheck::Kind::event_performed;
            check.event = pattern_from_json(require_field(cdoc, "event", path), path + ".event");
        } else if (kind == "ordered") {
            reject_unknown_fields(cdoc, {"kind", "before", "after"}, path);
            check.kind = OracleCheck::Kind::ordered;
            check.before = pattern_from_json(require_field(cdoc, "before", path), path + ".before");
            check.after = pattern_from_json(require_field(cdoc, "after", path), path + ".after");
        } else if (kind == "max_events") {
            reject_unknown_fields(cdoc, {"kind", "n"}, path);
            check.kind = OracleCheck::Kind::max_events;
            if (!cdoc.contains("n") || !cdoc["n"].is_number_integer())
                throw SchemaError("max_events needs an integer n", path);
            check.max_events = cdoc["n"].get<size_t>();
        } else {
            throw SchemaError("unknown check kind '" + kind + "'", path);
        }
        oracle.checks.push_back(std::move(check));
    }
    return oracle;
}

Oracle load_oracle_file(const std::string& path) { return load_oracle(load_json_file(path)); }

Verdict judge(const Oracle& oracle, const MigrationTrace& trace, const DriverSession& session) {
    const SimApp& app = session.app();

    // Validate references before judging anything.
    for (const auto& check : oracle.checks) {
        switch (check.kind) {
        case OracleCheck::Kind::state_equals: {
            auto it = app.variables.find(check.variable);
            if (it == app.variables.end())
                throw OracleMismatch("oracle references unknown variable '" + check.variable + "'");
            if (it->second.type != check.expected.type)
                throw OracleMismatch("oracle value type mismatch for variable '" +
                                     check.variable + "'");
            break;
        }
        case OracleCheck::Kind::visited_screen:
        case OracleCheck::Kind::final_screen:
            if (!app.has_screen(check.screen))
                throw OracleMismatch("oracle references unknown screen '" + check.screen + "'");
            break;
        default:
            break;
        }
    }

    if (trace.outcome == Outcome::budget_exhausted || trace.outcome == Outcome::error)
        return {false, "outcome " + to_string(trace.outcome)};

    for (const auto& check : oracle.checks) {
        bool ok = true;
        switch (check.kind) {
        case OracleCheck::Kind::state_equals: {
            auto it = session.valuation().find(check.variable);
            ok = it != session.valuation().end() && it->second == check.expected;
            break;
        }
        case OracleCheck::Kind::visited_screen: {
            const std::string& activity = app.screen(check.screen).screen.activity;
            ok = std::find(trace.activities.begin(), trace.activities.end(), activity) !=
                 trace.activities.end();
            break;
        }
        case OracleCheck::Kind::final_screen:
            ok = session.current_screen_id() == check.screen;
            break;
        case OracleCheck::Kind::event_performed:
            ok = first_match(check.event, trace.events).has_value();
            break;
        case OracleCheck::Kind::ordered: {
            auto b = first_match(check.before, trace.events);
            auto a = first_match(check.after, trace.events);
            ok = b && a && *b < *a;
            break;
        }
        case OracleCheck::Kind::max_events:
            ok = trace.events.size() <= check.max_events;
            break;
        }
        if (!ok) return {false, check.label()};
    }
    return {true, ""};
}

double success_rate(const std::vector<Verdict>& verdicts) {
    if (verdicts.empty()) throw EmptySuite("success rate over an empty suite");
    double passes = 0.0;
    for (const auto& v : verdicts)
        if (v.pass) passes += 1.0;
    return passes / static_cast<double>(verdicts.size());
}

PrfStats precision_recall(int tp, int fp, int fn) {
    PrfStats stats;
    stats.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    stats.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    stats.f1 = (stats.precision + stats.recall) == 0.0
                   ? 0.0
                   : 2.0 * stats.precision * stats.recall / (stats.precision + stats.recall);
    return stats;
}

SuiteManifest load_suite_manifest(const std::string& path) {
    Json doc = load_json_file(path);
    reject_unknown_fields(doc, {"pairs"}, "");
    const Json& pairs = require_field(doc, "pairs", "");
    if (!pairs.is_array()) throw SchemaError("pairs must be an array", "pairs");

    SuiteManifest manifest;
    manifest.base_dir = fs::path(path).parent_path().string();
    for (size_t i = 0; i < pairs.size(); ++i) {
        std::string ppath = "pairs[" + std::to_string(i) + "]";
        const Json& pdoc = pairs[i];
        reject_unknown_fields(pdoc, {"source_test", "target_app", "oracle", "truth", "mapping", "taxonomy"},
                              ppath);
        SuitePair pair;
        pair.source_test = require_string(pdoc, "source_test", ppath);
        pair.target_app = require_string(pdoc, "target_app", ppath);
        pair.oracle = require_string(pdoc, "oracle", ppath);
        if (pdoc.contains("truth")) pair.truth = pdoc["truth"].get<std::string>();
        pair.mapping = require_string(pdoc, "mapping", ppath);
        if (pair.mapping != "1to1" && pair.mapping != "non1to1")
            throw SchemaError("mapping must be 1to1 or non1to1", ppath + ".mapping");
        pair.taxonomy = require_string(pdoc, "taxonomy", ppath);
        if (pair.taxonomy != "extra" && pair.taxonomy != "missing" &&
            pair.taxonomy != "reversed" && pair.taxonomy != "plain")
            throw SchemaError("taxonomy must be extra, missing, reversed, or plain",
                              ppath + ".taxonomy");
        manifest.pairs.push_back(std::move(pair));
    }
    return manifest;
}

std::optional<SkillHints> load_hints_for(const std::string& test_path, const TestCase& tc) {
    fs::path p(test_path);
    fs::path hint_path = p.parent_path() / (p.stem().string() + ".hierarchy.json");
    if (!fs::exists(hint_path)) return std::nullopt;
    HierarchicalTestCase h = load_hierarchy(read_text_file(hint_path.string()), tc);
    SkillHints hints;
    hints.goal = h.goal;
    hints.skills = h.skills;
    return hints;
}

MigrationRun run_pair(const std::string& planner_name, const std::string& reasoner_name,
                      const TestCase& source, const SkillHints* hints, const SimApp& app,
                      const Oracle* oracle, const PlannerConfig& cfg) {
    DriverSession session(app);
    MigrationRun run;

    if (planner_name == "matcher") {
        run.trace = migrate_matcher(source, session, lexical_similarity, cfg);
    } else {
        std::unique_ptr<Reasoner> reasoner;
        if (reasoner_name == "heuristic") {
            reasoner = std::make_unique<HeuristicReasoner>(
                HeuristicConfig{cfg.theta_skill, cfg.theta_done});
        } else if (reasoner_name == "remote") {
            reasoner = std::make_unique<RemoteReasoner>(RemoteConfig::from_env());
        } else {
            throw ConfigError("unknown reasoner '" + reasoner_name + "'");
        }
        if (planner_name == "sail") {
            run.trace = migrate_sail(source, session, *reasoner, cfg, hints);
        } else if (planner_name == "trace") {
            run.trace = migrate_trace_ablation(source, session, *reasoner, cfg, hints);
        } else if (planner_name == "target") {
            run.trace = migrate_target_ablation(source, session, *reasoner, cfg, hints);
        } else {
            throw ConfigError("unknown planner '" + planner_name + "'");
        }
    }

    if (oracle) {
        run.verdict = judge(*oracle, run.trace, session);
        run.judged = true;
    }
    return run;
}

namespace {

struct Task {
    size_t planner_index;
    size_t reasoner_index;
    size_t pair_index;
};

std::string pair_id_of(const SuitePair& pair, const TestCase& tc, const SimApp& app) {
    (void)pair;
    return tc.id + "->" + app.id;
}

} // namespace

SuiteReport run_suite(const SuiteManifest& manifest, const std::vector<std::string>& planners,
                      const std::vector<std::string>& reasoners, const PlannerConfig& cfg,
                      int jobs) {
    if (manifest.pairs.empty()) throw EmptySuite("suite manifest has no pairs");
    if (planners.empty()) throw ConfigError("no planners selected");
    if (reasoners.empty()) throw ConfigError("no reasoners selected");
    for (const auto& p : planners)
        if (p != "sail" && p != "trace" && p != "target" && p != "matcher")
            throw ConfigError("unknown planner '" + p + "'");
    for (const auto& r : reasoners)
        if (r != "heuristic" && r != "remote")
            throw ConfigError("unknown reasoner '" + r + "' (suites accept heuristic or remote)");

    std::vector<Task> tasks;
    for (size_t pl = 0; pl < planners.size(); ++pl)
        for (size_t re = 0; re < reasoners.size(); ++re)
            for (size_t pi = 0; pi < manifest.pairs.size(); ++pi)
                tasks.push_back({pl, re, pi});

    std::vector<PairResult> results(tasks.size());
    std::atomic<size_t> next{0};

    auto worker = [&] {
        for (;;) {
            size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            const Task& task = tasks[t];
            const SuitePair& pair = manifest.pairs[task.pair_index];
            PairResult& row = results[t];
            row.planner = planners[task.planner_index];
            row.reasoner = reasoners[task.reasoner_index];
            row.mapping = pair.mapping;
            row.taxonomy = pair.taxonomy;
            try {
                fs::path base(manifest.base_dir);
                TestCase source =
                    load_test_case(read_text_file((base / pair.source_test).string()));
                auto hints = load_hints_for((base / pair.source_test).string(), source);
                SimApp app = load_app_file((base / pair.target_app).string());
                Oracle oracle = load_oracle_file((base / pair.oracle).string());
                row.pair_id = pair_id_of(pair, source, app);

                MigrationRun run = run_pair(row.planner, row.reasoner, source,
                                            hints ? &*hints : nullptr, app, &oracle, cfg);
                row.outcome = run.trace.outcome;
                row.pass = run.verdict.pass;
                row.detail = run.verdict.detail;
                row.event_count = run.trace.events.size();

                if (pair.truth) {
                    TestCase truth =
                        load_test_case(read_text_file((base / *pair.truth).string()));
                    Classification cls = classify_events(run.trace.events, truth.steps);
                    row.prf = precision_recall(cls.tp, cls.fp, cls.fn);
                }
            } catch (const std::exception& e) {
                if (row.pair_id.empty())
                    row.pair_id = pair.source_test + "->" + pair.target_app;
                row.outcome = Outcome::error;
                row.pass = false;
                row.detail = e.what();
            }
        }
    };

    int thread_count = std::max(1, jobs);
    if (static_cast<size_t>(thread_count) > tasks.size())
        thread_count = static_cast<int>(tasks.size());
    std::vector<std::thread> pool;
    for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    SuiteReport report;
    report.pairs = std::move(results);

    for (size_t pl = 0; pl < planners.size(); ++pl) {
        for (size_t re = 0; re < reasoners.size(); ++re) {
            ApproachStats stats;
            stats.planner = planners[pl];
            stats.reasoner = reasoners[re];
            stats.failure_taxonomy = {{"extra", 0}, {"missing", 0}, {"reversed", 0}, {"other", 0}};
            int one_total = 0, one_pass = 0, non_total = 0, non_pass = 0;
            for (const auto& row : report.pairs) {
                if (row.planner != stats.planner || row.reasoner != stats.reasoner) continue;
                ++stats.total;
                if (row.pass) ++stats.passes;
                if (row.mapping == "1to1") {
                    ++one_total;
                    if (row.pass) ++one_pass;
                } else {
                    ++non_total;
                    if (row.pass) ++non_pass;
                }
                if (!row.pass) {
                    std::string tag = row.taxonomy == "plain" ? "other" : row.taxonomy;
                    ++stats.failure_taxonomy[tag];
                }
            }
            stats.overall_sr =
                stats.total == 0 ? 0.0 : static_cast<double>(stats.passes) / stats.total;
            stats.one_to_one_sr = one_total == 0 ? 0.0 : static_cast<double>(one_pass) / one_total;
            stats.non_one_to_one_sr =
                non_total == 0 ? 0.0 : static_cast<double>(non_pass) / non_total;
            report.approaches.push_back(std::move(stats));
        }
    }
    return report;
}

Json suite_report_to_json(const SuiteReport& report) {
    Json doc = Json::object();
    Json approaches = Json::array();
    for (const auto& a : report.approaches) {
        Json ad = Json::object();
        ad["planner"] = a.planner;
        ad["reasoner"] = a.reasoner;
        ad["total"] = a.total;
        ad["passes"] = a.passes;
        ad["overall_sr"] = a.overall_sr;
        ad["one_to_one_sr"] = a.one_to_one_sr;
        ad["non_one_to_one_sr"] = a.non_one_to_one_sr;
        Json tax = Json::object();
        for (const auto& [tag, count] : a.failure_taxonomy) tax[tag] = count;
        ad["failure_taxonomy"] = std::move(tax);
        approaches.push_back(std::move(ad));
    }
    doc["approaches"] = std::move(approaches);

    Json pairs = Json::array();
    for (const auto& row : report.pairs) {
        Json rd = Json::object();
        rd["planner"] = row.planner;
        rd["reasoner"] = row.reasoner;
        rd["pair"] = row.pair_id;
        rd["mapping"] = row.mapping;
        rd["taxonomy"] = row.taxonomy;
        rd["outcome"] = to_string(row.outcome);
        rd["pass"] = row.pass;
        if (!row.detail.empty()) rd["detail"] = row.detail;
        rd["events"] = row.event_count;
        if (row.prf) {
            rd["precision"] = row.prf->precision;
            rd["recall"] = row.prf->recall;
            rd["f1"] = row.prf->f1;
        }
        pairs.push_back(std::move(rd));
    }
    doc["pairs"] = std::move(pairs);
    return doc;
}

namespace {

std::string pct(double value) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << value * 100.0;
    return os.str();
}

} // namespace

std::string suite_report_to_markdown(const SuiteReport& report) {
    std::ostringstream os;
    os << "| approach | overall SR | 1-to-1 SR | non-1-to-1 SR |\n";
    os << "|---|---|---|---|\n";
    for (const auto& a : report.approaches) {
        os << "| " << a.planner << " (" << a.reasoner << ") | " << pct(a.overall_sr) << " | "
           << pct(a.one_to_one_sr) << " | " << pct(a.non_one_to_one_sr) << " |\n";
    }
    os << "\n";
    os << "| planner | reasoner | pair | mapping | taxonomy | outcome | verdict |\n";
    os << "|---|---|---|---|---|---|---|\n";
    for (const auto& row : report.pairs) {
        os << "| " << row.planner << " | " << row.reasoner << " | " << row.pair_id << " | "
           << row.mapping << " | " << row.taxonomy << " | " << to_string(row.outcome) << " | "
           << (row.pass ? "pass" : "fail: " + row.detail) << " |\n";
    }
    return os.str();
}

void write_suite_report(const SuiteReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/report.json", suite_report_to_json(report).dump(2) + "\n");
    write_text_file(out_dir + "/report.md", suite_report_to_markdown(report));
}

} // namespace sail
