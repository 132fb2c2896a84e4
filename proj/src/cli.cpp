#include "sail/cli.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sail/eval.hpp"
#include "sail/json_util.hpp"
#include "sail/matcher.hpp"
#include "sail/planner.hpp"
#include "sail/reasoner.hpp"
#include "sail/sim_env.hpp"

namespace sail::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMigrationFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfra = 3;

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string current;
    std::istringstream in(csv);
    while (std::getline(in, current, ','))
        if (!current.empty()) out.push_back(current);
    return out;
}

struct MigrateOptions {
    std::string source;
    std::string app;
    std::string planner = "sail";
    std::string reasoner = "heuristic";
    std::string out_dir;
    std::string transcript;
    PlannerConfig cfg;
};

int cmd_migrate(const MigrateOptions& opt, std::ostream& out) {
    TestCase source = load_test_case(read_text_file(opt.source));
    auto hints = load_hints_for(opt.source, source);
    SimApp app = load_app_file(opt.app);
    DriverSession session(app);

    MigrationTrace trace;
    if (opt.planner == "matcher") {
        trace = migrate_matcher(source, session, lexical_similarity, opt.cfg);
    } else {
        std::unique_ptr<Reasoner> reasoner;
        if (opt.reasoner == "heuristic") {
            reasoner = std::make_unique<HeuristicReasoner>(
                HeuristicConfig{opt.cfg.theta_skill, opt.cfg.theta_done});
        } else if (opt.reasoner == "replay") {
            if (opt.transcript.empty())
                throw ConfigError("--reasoner replay requires --transcript");
            reasoner = std::make_unique<ReplayReasoner>(
                transcript_from_jsonl(read_text_file(opt.transcript)));
        } else if (opt.reasoner == "remote") {
            RemoteConfig rc = RemoteConfig::from_env();
            if (rc.base_url.empty())
                throw ConfigError("remote reasoner needs SAIL_REASONER_URL");
            reasoner = std::make_unique<RemoteReasoner>(rc);
        } else {
            throw ConfigError("unknown reasoner '" + opt.reasoner + "'");
        }

        if (opt.planner == "sail")
            trace = migrate_sail(source, session, *reasoner, opt.cfg, hints ? &*hints : nullptr);
        else if (opt.planner == "trace")
            trace = migrate_trace_ablation(source, session, *reasoner, opt.cfg,
                                           hints ? &*hints : nullptr);
        else if (opt.planner == "target")
            trace = migrate_target_ablation(source, session, *reasoner, opt.cfg,
                                            hints ? &*hints : nullptr);
        else
            throw ConfigError("unknown planner '" + opt.planner + "'");
    }

    write_trace_report(trace, opt.out_dir);
    out << "outcome: " << to_string(trace.outcome);
    if (!trace.outcome_detail.empty()) out << " (" << trace.outcome_detail << ")";
    out << "\n" << "events: " << trace.events.size() << "\n"
        << "report: " << opt.out_dir << "\n";

    switch (trace.outcome) {
    case Outcome::goal_reached: return kExitOk;
    case Outcome::budget_exhausted:
    case Outcome::incomplete: return kExitMigrationFailed;
    case Outcome::error: return kExitInfra;
    }
    return kExitInfra;
}

struct BenchOptions {
    std::string suite;
    std::string planners = "sail,matcher";
    std::string reasoners = "heuristic";
    std::string out_dir;
    int jobs = 1;
    PlannerConfig cfg;
};

int cmd_bench(const BenchOptions& opt, std::ostream& out) {
    SuiteManifest manifest = load_suite_manifest(opt.suite);
    SuiteReport report = run_suite(manifest, split_csv(opt.planners), split_csv(opt.reasoners),
                                   opt.cfg, opt.jobs);
    write_suite_report(report, opt.out_dir);
    for (const auto& a : report.approaches) {
        out << a.planner << " (" << a.reasoner << "): overall " << a.overall_sr << ", 1to1 "
            << a.one_to_one_sr << ", non1to1 " << a.non_one_to_one_sr << "\n";
    }
    out << "report: " << opt.out_dir << "\n";
    return kExitOk;
}

struct MatchEvalOptions {
    std::string dataset;
    std::string scorer = "lexical";
    std::string out_dir;
};

int cmd_match_eval(const MatchEvalOptions& opt, std::ostream& out) {
    if (opt.scorer != "lexical" && opt.scorer != "reasoner")
        throw ConfigError("unknown scorer '" + opt.scorer + "'");

    std::vector<MatchQuery> queries = load_match_dataset(load_json_file(opt.dataset));

    MatchReport report;
    report.n = queries.size();

    std::ostringstream breakdown;
    breakdown << "| query | source | candidates | result |\n|---|---|---|---|\n";

    if (opt.scorer == "lexical") {
        std::vector<std::optional<int>> ranks;
        for (size_t i = 0; i < queries.size(); ++i) {
            RankedResult r = rank(queries[i], lexical_similarity);
            ranks.push_back(r.rank_of_truth);
            breakdown << "| " << (i + 1) << " | " << queries[i].source_description << " | "
                      << queries[i].candidates.size() << " | rank "
                      << (r.rank_of_truth ? std::to_string(*r.rank_of_truth) : "none") << " |\n";
        }
        report.top1 = top1(ranks);
        report.mrr = mrr(ranks);
    } else {
        HeuristicReasoner backend;
        size_t hits = 0;
        for (size_t i = 0; i < queries.size(); ++i) {
            ReasonerSession session(backend);
            size_t pick = reasoner_pick(queries[i], session);
            const MatchCandidate& chosen = queries[i].candidates[pick];
            bool hit = queries[i].truth_bounds && chosen.bounds &&
                       center_in_bounds(*chosen.bounds, *queries[i].truth_bounds);
            if (hit) ++hits;
            breakdown << "| " << (i + 1) << " | " << queries[i].source_description << " | "
                      << queries[i].candidates.size() << " | picked " << (pick + 1) << " ("
                      << (hit ? "hit" : "miss") << ") |\n";
        }
        report.top1 = queries.empty() ? 0.0 : static_cast<double>(hits) / queries.size();
    }

    std::filesystem::create_directories(opt.out_dir);
    Json doc = Json::object();
    doc["n"] = report.n;
    doc["top1"] = report.top1;
    if (report.mrr) doc["mrr"] = *report.mrr;
    write_text_file(opt.out_dir + "/report.json", doc.dump(2) + "\n");
    write_text_file(opt.out_dir + "/breakdown.md", breakdown.str());

    out << "n: " << report.n << "\n" << "top1: " << report.top1 << "\n";
    if (report.mrr) out << "mrr: " << *report.mrr << "\n";
    out << "report: " << opt.out_dir << "\n";
    return kExitOk;
}

struct ParseOptions {
    std::string dump;
    bool events = false;
};

int cmd_parse(const ParseOptions& opt, std::ostream& out) {
    UiScreen screen = parse_hierarchy(read_text_file(opt.dump));

    size_t count = 0;
    std::function<void(const UiElement&)> visit = [&](const UiElement& e) {
        ++count;
        for (const auto& c : e.children) visit(c);
    };
    visit(screen.root);

    out << "activity: " << screen.activity << "\n"
        << "elements: " << count << "\n"
        << "digest: " << screen.raw_digest << "\n";

    if (opt.events) {
        std::vector<std::string> descriptions;
        for (const UiEvent& e : extract_events(screen))
            descriptions.push_back(describe_event(e, screen));
        out << "events:\n" << render_event_list(descriptions);
    }
    return kExitOk;
}

void add_planner_flags(CLI::App* cmd, PlannerConfig& cfg) {
    cmd->add_option("--max-steps", cfg.max_steps, "Driver interaction budget");
    cmd->add_option("--tau", cfg.similarity_threshold, "Matcher baseline similarity threshold");
    cmd->add_option("--theta-skill", cfg.theta_skill, "Heuristic skill retrieval floor");
    cmd->add_option("--theta-done", cfg.theta_done, "Heuristic step completion threshold");
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Skill-adaptive UI test migration toolkit"};
    app.require_subcommand(1);
    // Config keys mirror the flags, grouped in a [subcommand] section.
    app.set_config("--config");
    app.fallthrough();

    MigrateOptions migrate_opt;
    CLI::App* migrate = app.add_subcommand("migrate", "Migrate a source test onto a target app");
    migrate->add_option("--source", migrate_opt.source, "Source test document")->required();
    migrate->add_option("--app", migrate_opt.app, "Target app document")->required();
    migrate->add_option("--planner", migrate_opt.planner, "sail|trace|target|matcher");
    migrate->add_option("--reasoner", migrate_opt.reasoner, "heuristic|replay|remote");
    migrate->add_option("--out", migrate_opt.out_dir, "Report directory")->required();
    migrate->add_option("--transcript", migrate_opt.transcript, "Transcript for the replay reasoner");
    add_planner_flags(migrate, migrate_opt.cfg);

    BenchOptions bench_opt;
    CLI::App* bench = app.add_subcommand("bench", "Run a migration suite");
    bench->add_option("--suite", bench_opt.suite, "Suite manifest")->required();
    bench->add_option("--planners", bench_opt.planners, "Comma-separated planner list");
    bench->add_option("--reasoners", bench_opt.reasoners, "Comma-separated reasoner list");
    bench->add_option("--out", bench_opt.out_dir, "Report directory")->required();
    bench->add_option("--jobs", bench_opt.jobs, "Parallel migrations");
    add_planner_flags(bench, bench_opt.cfg);

    MatchEvalOptions match_opt;
    CLI::App* match_eval = app.add_subcommand("match-eval", "Evaluate event matching");
    match_eval->add_option("--dataset", match_opt.dataset, "Match dataset document")->required();
    match_eval->add_option("--scorer", match_opt.scorer, "lexical|reasoner");
    match_eval->add_option("--out", match_opt.out_dir, "Report directory")->required();

    ParseOptions parse_opt;
    CLI::App* parse = app.add_subcommand("parse", "Parse a hierarchy dump");
    parse->add_option("--dump", parse_opt.dump, "Hierarchy XML file")->required();
    parse->add_flag("--events", parse_opt.events, "Print the extracted event list");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (migrate->parsed()) return cmd_migrate(migrate_opt, out);
        if (bench->parsed()) return cmd_bench(bench_opt, out);
        if (match_eval->parsed()) return cmd_match_eval(match_opt, out);
        if (parse->parsed()) return cmd_parse(parse_opt, out);
        err << "no subcommand selected\n";
        return kExitConfig;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const MalformedDump& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PartitionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const EmptySuite& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        err << "error: invalid document: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInfra;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInfra;
    }
}

} // namespace sail::cli
