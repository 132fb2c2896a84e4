#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "sail/reasoner.hpp"
#include "helpers.hpp"

using namespace sail;

namespace {

StepView step(const std::string& desc, Action action = Action::click) {
    StepView s;
    s.description = desc;
    s.action = action;
    return s;
}

DecisionRequest select_request(std::vector<std::string> events, const std::string& next_step) {
    DecisionRequest req;
    req.kind = DecisionKind::select_event;
    SkillView skill;
    skill.name = "skill";
    skill.description = "test skill";
    skill.steps.push_back(step(next_step));
    req.context.current_skill = skill;
    req.context.events = std::move(events);
    req.context.activity = "home";
    return req;
}

// Counts invocations; optionally fails the first call.
class CountingProvider : public VisionProvider {
public:
    explicit CountingProvider(bool fail_first = false) : fail_first_(fail_first) {}

    std::string describe(const UiElement& element) override {
        calls.fetch_add(1);
        if (fail_first_ && calls.load() == 1)
            throw ProviderUnavailable("provider offline");
        return "icon for " + element.class_role;
    }

    std::atomic<int> calls{0};

private:
    bool fail_first_;
};

UiElement bare_icon() {
    UiElement e;
    e.class_role = "android.widget.ImageButton";
    e.resource_id = "app:id/share";
    e.bounds = Bounds{0, 0, 64, 64};
    e.clickable = true;
    return e;
}

} // namespace

TEST_SUITE("render_prompt") {
    TEST_CASE("select_event numbers events from one") {
        DecisionRequest req = select_request({"click 'Save'", "press back"}, "click 'Save'");
        std::string prompt = render_prompt(req);
        CHECK(prompt.find("Answer with exactly one number.") != std::string::npos);
        CHECK(prompt.find("1. click 'Save'\n2. press back") != std::string::npos);
        CHECK(prompt.find("Current skill: skill") != std::string::npos);
    }

    TEST_CASE("skill_finished ends with the yes/no instruction") {
        DecisionRequest req;
        req.kind = DecisionKind::skill_finished;
        SkillView skill;
        skill.name = "s";
        skill.steps.push_back(step("click 'x'"));
        req.context.current_skill = skill;
        std::string prompt = render_prompt(req);
        std::string tail = "Answer YES or NO.";
        REQUIRE(prompt.size() >= tail.size());
        CHECK(prompt.substr(prompt.size() - tail.size()) == tail);
    }

    TEST_CASE("conclude_goal embeds every source step") {
        DecisionRequest req;
        req.kind = DecisionKind::conclude_goal;
        req.context.source_steps = {step("click 'Settings'"), step("click 'Sign out'")};
        std::string prompt = render_prompt(req);
        CHECK(prompt.find("1. click 'Settings'") != std::string::npos);
        CHECK(prompt.find("2. click 'Sign out'") != std::string::npos);
    }

    TEST_CASE("history is windowed to the configured tail") {
        DecisionRequest req = select_request({"press back"}, "click 'x'");
        for (int i = 0; i < 14; ++i)
            req.context.history.push_back("click 'h" + std::to_string(i) + "'");
        req.context.history_window = 10;
        std::string prompt = render_prompt(req);
        CHECK(prompt.find("click 'h3'") == std::string::npos);
        CHECK(prompt.find("click 'h4'") != std::string::npos);
        CHECK(prompt.find("click 'h13'") != std::string::npos);
    }

    TEST_CASE("deterministic") {
        DecisionRequest req = select_request({"click 'a'", "click 'b'"}, "click 'a'");
        CHECK(render_prompt(req) == render_prompt(req));
    }

    TEST_CASE("templates match the frozen goldens") {
        DecisionRequest req;
        req.kind = DecisionKind::select_event;
        req.context.goal = "Set the font size bigger and open a news article";
        SkillView skill;
        skill.name = "Setting Font";
        skill.description = "Make the article font bigger from the settings";
        skill.steps = {step("click 'menu'"), step("click 'Settings'")};
        req.context.current_skill = skill;
        req.context.events = {"click 'Settings'", "click 'Stories'", "press back"};
        req.context.history = {"click 'menu'"};
        req.context.activity = "home";
        CHECK(render_prompt(req) == sail::test::fixture_text("prompts/select_event.golden.txt"));

        DecisionRequest fin;
        fin.kind = DecisionKind::skill_finished;
        fin.context.goal = req.context.goal;
        fin.context.current_skill = skill;
        fin.context.history = {"click 'menu'", "click 'Settings'"};
        fin.context.activity = "settings";
        CHECK(render_prompt(fin) == sail::test::fixture_text("prompts/skill_finished.golden.txt"));
    }
}

TEST_SUITE("parse_reply") {
    TEST_CASE("yes with surrounding prose") {
        DecisionReply r = parse_reply(DecisionKind::skill_finished, "Yes, the font was enlarged.");
        CHECK(r.decision);
        CHECK_FALSE(parse_reply(DecisionKind::goal_finished, "no - still missing steps").decision);
    }

    TEST_CASE("first standalone integer wins") {
        DecisionReply r = parse_reply(DecisionKind::select_event, "I choose option 2 because...");
        CHECK(r.number == 2);
    }

    TEST_CASE("no integer is unparseable") {
        CHECK_THROWS_AS(parse_reply(DecisionKind::select_event, "none of these"),
                        UnparseableReply);
    }

    TEST_CASE("retrieve accepts NONE") {
        CHECK_FALSE(parse_reply(DecisionKind::retrieve_skill, "NONE").number.has_value());
        CHECK(parse_reply(DecisionKind::retrieve_skill, "skill 2 fits").number == 2);
        CHECK_FALSE(
            parse_reply(DecisionKind::retrieve_skill, "none, though 2 was close").number.has_value());
    }

    TEST_CASE("partition grammar") {
        DecisionReply r = parse_reply(DecisionKind::divide_skills,
                                      "SKILL Setting Font: 0-4\nskill Open News: 4-6\n");
        REQUIRE(r.skills.size() == 2);
        CHECK(r.skills[0].name == "Setting Font");
        CHECK(r.skills[0].lo == 0);
        CHECK(r.skills[0].hi == 4);
        CHECK(r.skills[1].name == "Open News");
        CHECK_THROWS_AS(parse_reply(DecisionKind::divide_skills, "no skills here"),
                        UnparseableReply);
    }

    TEST_CASE("direction tokens") {
        CHECK(parse_reply(DecisionKind::swipe_direction, "Swipe DOWN, please").direction ==
              SwipeDirection::down);
        CHECK_THROWS_AS(parse_reply(DecisionKind::swipe_direction, "sideways"), UnparseableReply);
    }

    TEST_CASE("input text takes the first line and strips quotes") {
        CHECK(parse_reply(DecisionKind::input_text, "\"Tokyo\"\nsecond line").text == "Tokyo");
        CHECK_THROWS_AS(parse_reply(DecisionKind::input_text, "   \n"), UnparseableReply);
    }
}

TEST_SUITE("heuristic backend") {
    TEST_CASE("select_event prefers the token-sharing event") {
        HeuristicReasoner backend;
        ReasonerSession session(backend);
        DecisionRequest req = select_request(
            {"press back", "click 'Save draft'", "swipe down on 'list'"}, "click 'Save draft'");
        DecisionReply reply = session.decide(req);
        CHECK(reply.number == 2); // 1-based, the 'Save draft' event
    }

    TEST_CASE("goal_finished with nothing left is true") {
        HeuristicReasoner backend;
        ReasonerSession session(backend);
        DecisionRequest req;
        req.kind = DecisionKind::goal_finished;
        req.context.history = {"click 'a'", "click 'b'"};
        CHECK(session.decide(req).decision);
    }

    TEST_CASE("goal_finished needs every remaining skill covered") {
        HeuristicReasoner backend;
        ReasonerSession session(backend);
        DecisionRequest req;
        req.kind = DecisionKind::goal_finished;
        SkillView skill;
        skill.name = "s";
        skill.steps = {step("click 'Open settings menu'")};
        req.context.skills = {skill};
        req.context.history = {"click 'unrelated'"};
        CHECK_FALSE(session.decide(req).decision);
        req.context.history = {"click 'Open settings menu'"};
        CHECK(session.decide(req).decision);
    }

    TEST_CASE("retrieve_skill honors the floor and ignores back events") {
        HeuristicReasoner backend;
        ReasonerSession session(backend);
        DecisionRequest req;
        req.kind = DecisionKind::retrieve_skill;
        SkillView far;
        far.name = "far";
        far.steps = {step("press back", Action::back)};
        req.context.skills = {far};
        req.context.events = {"click 'something'", "press back"};
        req.context.event_actions = {Action::click, Action::back};
        CHECK_FALSE(session.decide(req).number.has_value()); // back does not count

        SkillView near;
        near.name = "near";
        near.steps = {step("click 'something else'")};
        req.context.skills = {far, near};
        CHECK(session.decide(req).number == 2);
    }

    TEST_CASE("conclude_goal joins steps unless hinted") {
        HeuristicReasoner backend;
        ReasonerSession session(backend);
        DecisionRequest req;
        req.kind = DecisionKind::conclude_goal;
        req.context.source_steps = {step("click 'a'"), step("click 'b'")};
        CHECK(session.decide(req).text == "click 'a'; click 'b'");
        req.context.hint_goal = "Do the thing";
        CHECK(session.decide(req).text == "Do the thing");
    }

    TEST_CASE("divide_skills falls back to singleton skills") {
        HeuristicReasoner backend;
        ReasonerSession session(backend);
        DecisionRequest req;
        req.kind = DecisionKind::divide_skills;
        req.context.source_steps = {step("click 'a'"), step("click 'b'")};
        DecisionReply reply = session.decide(req);
        REQUIRE(reply.skills.size() == 2);
        CHECK(reply.skills[0].lo == 0);
        CHECK(reply.skills[0].hi == 1);
        CHECK(reply.skills[1].lo == 1);
        CHECK(reply.skills[1].hi == 2);

        req.context.hint_skills = {{"all", "d", 0, 2}};
        CHECK(session.decide(req).skills.size() == 1);
    }

    TEST_CASE("input_text echoes the first unfinished input step") {
        HeuristicReasoner backend;
        ReasonerSession session(backend);
        DecisionRequest req;
        req.kind = DecisionKind::input_text;
        StepView input = step("type 'Tokyo' into 'destination'", Action::input);
        input.value = "Tokyo";
        req.context.source_steps = {step("click 'Flights'"), input};
        CHECK(session.decide(req).text == "Tokyo");
    }

    TEST_CASE("identical requests yield identical replies") {
        HeuristicReasoner backend;
        DecisionRequest req = select_request({"click 'a'", "click 'b'", "press back"}, "click 'b'");
        TranscriptRecord first = backend.decide(req);
        TranscriptRecord second = backend.decide(req);
        CHECK(first.raw == second.raw);
        CHECK(first.reply->number == second.reply->number);
        CHECK(first.prompt == second.prompt);
    }
}

TEST_SUITE("replay backend") {
    TEST_CASE("exhausted fixtures raise") {
        ReplayReasoner backend(Transcript{});
        ReasonerSession session(backend);
        DecisionRequest req = select_request({"press back"}, "click 'x'");
        CHECK_THROWS_AS(session.decide(req), FixtureExhausted);
    }

    TEST_CASE("kind mismatch raises") {
        TranscriptRecord rec;
        rec.kind = DecisionKind::goal_finished;
        rec.raw = "YES";
        ReplayReasoner backend({rec});
        ReasonerSession session(backend);
        DecisionRequest req = select_request({"press back"}, "click 'x'");
        CHECK_THROWS_AS(session.decide(req), FixtureExhausted);
    }

    TEST_CASE("recorded reply wins over raw text") {
        TranscriptRecord rec;
        rec.kind = DecisionKind::select_event;
        rec.raw = "pick the second one"; // raw alone would be unparseable-ish
        DecisionReply reply;
        reply.kind = DecisionKind::select_event;
        reply.number = 2;
        rec.reply = reply;
        ReplayReasoner backend({rec});
        ReasonerSession session(backend);
        DecisionRequest req = select_request({"click 'a'", "click 'b'"}, "click 'b'");
        CHECK(session.decide(req).number == 2);
    }

    TEST_CASE("raw-only records are parsed with the normal grammar") {
        TranscriptRecord rec;
        rec.kind = DecisionKind::goal_finished;
        rec.raw = "Yes, we are done";
        ReplayReasoner backend({rec});
        ReasonerSession session(backend);
        DecisionRequest req;
        req.kind = DecisionKind::goal_finished;
        CHECK(session.decide(req).decision);
    }
}

TEST_SUITE("transcripts") {
    TEST_CASE("jsonl round-trip") {
        HeuristicReasoner backend;
        ReasonerSession session(backend);
        session.decide(select_request({"click 'a'", "press back"}, "click 'a'"));
        DecisionRequest gf;
        gf.kind = DecisionKind::goal_finished;
        session.decide(gf);

        std::string jsonl = transcript_to_jsonl(session.transcript());
        Transcript loaded = transcript_from_jsonl(jsonl);
        REQUIRE(loaded.size() == 2);
        CHECK(loaded[0].kind == DecisionKind::select_event);
        CHECK(loaded[0].reply->number == session.transcript()[0].reply->number);
        CHECK(transcript_to_jsonl(loaded) == jsonl);
    }

    TEST_CASE("bundled counterexample transcript loads") {
        Transcript t =
            transcript_from_jsonl(sail::test::fixture_text("transcripts/url_counterexample.jsonl"));
        CHECK(t.size() == 17);
        CHECK(t.front().kind == DecisionKind::conclude_goal);
        CHECK(t.back().kind == DecisionKind::goal_finished);
    }
}

TEST_SUITE("vision descriptions") {
    TEST_CASE("provider invoked at most once per element") {
        CountingProvider provider;
        DescriptionCache cache;
        UiElement icon = bare_icon();
        std::string first = describe_element_visual(icon, provider, cache);
        std::string second = describe_element_visual(icon, provider, cache);
        CHECK(first == second);
        CHECK(provider.calls.load() == 1);
    }

    TEST_CASE("elements with text violate the precondition") {
        CountingProvider provider;
        DescriptionCache cache;
        UiElement labeled = bare_icon();
        labeled.text = "Share";
        CHECK_THROWS_AS(describe_element_visual(labeled, provider, cache), PreconditionError);
        CHECK(provider.calls.load() == 0);
    }

    TEST_CASE("fixture provider is a table lookup") {
        UiElement icon = bare_icon();
        FixtureVisionProvider provider({{element_hash(icon), "share icon"}});
        DescriptionCache cache;
        CHECK(describe_element_visual(icon, provider, cache) == "share icon");
    }

    TEST_CASE("failures are not cached") {
        CountingProvider provider(/*fail_first=*/true);
        DescriptionCache cache;
        UiElement icon = bare_icon();
        CHECK_THROWS_AS(describe_element_visual(icon, provider, cache), ProviderUnavailable);
        CHECK(cache.size() == 0);
        CHECK(describe_element_visual(icon, provider, cache) == "icon for " + icon.class_role);
        CHECK(provider.calls.load() == 2);
    }

    TEST_CASE("concurrent lookups stay at one call per hash") {
        CountingProvider provider;
        DescriptionCache cache;
        std::vector<UiElement> icons;
        for (int i = 0; i < 10; ++i) {
            UiElement e = bare_icon();
            e.resource_id = "app:id/icon_" + std::to_string(i);
            icons.push_back(e);
        }
        std::vector<std::thread> threads;
        for (int t = 0; t < 8; ++t) {
            threads.emplace_back([&] {
                for (int round = 0; round < 50; ++round)
                    for (const auto& icon : icons) describe_element_visual(icon, provider, cache);
            });
        }
        for (auto& t : threads) t.join();
        CHECK(provider.calls.load() == 10);
        CHECK(cache.size() == 10);
    }

    TEST_CASE("enrich_screen fills description-less interactables") {
        UiScreen screen = parse_hierarchy(
            R"(<hierarchy activity="a"><node class="root" bounds="[0,0][100,100]">
               <node class="icon" resource-id="app:id/share" bounds="[0,0][64,64]" clickable="true"/>
               <node class="btn" text="Save" bounds="[0,64][100,100]" clickable="true"/>
               </node></hierarchy>)");
        UiElement icon = screen.root.children[0];
        FixtureVisionProvider provider({{element_hash(icon), "share icon"}});
        DescriptionCache cache;
        UiScreen enriched = enrich_screen(screen, provider, cache);
        CHECK(enriched.root.children[0].vision_desc == "share icon");
        CHECK_FALSE(enriched.root.children[1].vision_desc.has_value());
        CHECK(element_descriptor(enriched, enriched.root.children[0]) == "share icon");
    }
}

TEST_SUITE("remote backend") {
    TEST_CASE("speaks the chat protocol and retries transient failures") {
        httplib::Server server;
        std::atomic<int> hits{0};
        std::string seen_auth, seen_body;
        server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            int n = hits.fetch_add(1) + 1;
            if (n == 1) {
                res.status = 500;
                return;
            }
            seen_auth = req.get_header_value("Authorization");
            seen_body = req.body;
            res.set_content(
                R"({"choices":[{"message":{"content":"I pick 1."}}],"usage":{"prompt_tokens":12,"completion_tokens":4}})",
                "application/json");
        });
        int port = server.bind_to_any_port("127.0.0.1");
        std::thread server_thread([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        RemoteConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
        cfg.api_key = "test-key";
        cfg.model = "test-model";
        cfg.retry_delay_ms = 0;
        RemoteReasoner backend(cfg);
        ReasonerSession session(backend);

        DecisionRequest req = select_request({"click 'a'", "press back"}, "click 'a'");
        DecisionReply reply = session.decide(req);
        CHECK(reply.number == 1);
        CHECK(hits.load() == 2);
        CHECK(seen_auth == "Bearer test-key");

        Json body = Json::parse(seen_body);
        CHECK(body["model"] == "test-model");
        CHECK(body["temperature"] == 0);
        CHECK(body["messages"][0]["role"] == "user");
        REQUIRE(session.transcript().size() == 1);
        CHECK(session.transcript()[0].tokens->prompt_tokens == 12);

        server.stop();
        server_thread.join();
    }

    TEST_CASE("one reformat retry before giving up") {
        httplib::Server server;
        std::atomic<int> hits{0};
        bool saw_reformat = false;
        server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            hits.fetch_add(1);
            Json body = Json::parse(req.body);
            std::string prompt = body["messages"][0]["content"].get<std::string>();
            if (prompt.find("Answer with the required format only.") != std::string::npos)
                saw_reformat = true;
            res.set_content(R"({"choices":[{"message":{"content":"no idea, sorry"}}]})",
                            "application/json");
        });
        int port = server.bind_to_any_port("127.0.0.1");
        std::thread server_thread([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        RemoteConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
        cfg.retry_delay_ms = 0;
        RemoteReasoner backend(cfg);
        ReasonerSession session(backend);
        DecisionRequest req = select_request({"click 'a'"}, "click 'a'");
        CHECK_THROWS_AS(session.decide(req), UnparseableReply);
        CHECK(hits.load() == 2);
        CHECK(saw_reformat);

        server.stop();
        server_thread.join();
    }

    TEST_CASE("unreachable server raises BackendUnavailable") {
        RemoteConfig cfg;
        cfg.base_url = "http://127.0.0.1:9"; // discard port, nothing listens
        cfg.retry_delay_ms = 0;
        cfg.max_attempts = 2;
        RemoteReasoner backend(cfg);
        ReasonerSession session(backend);
        DecisionRequest req = select_request({"click 'a'"}, "click 'a'");
        CHECK_THROWS_AS(session.decide(req), BackendUnavailable);
    }
}
