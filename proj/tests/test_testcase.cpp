#include <doctest.h>

#include "sail/testcase.hpp"
#include "helpers.hpp"

using namespace sail;
using sail::test::fixture_text;

namespace {

const char* kThreeClicks = R"({
  "id": "t1",
  "source_app": "app_a",
  "steps": [
    { "action": "click", "target": { "text": "One" } },
    { "action": "click", "target": { "text": "Two" } },
    { "action": "click", "target": { "text": "Three" } }
  ]
})";

TestCase five_steps() {
    TestCase tc;
    tc.id = "t";
    tc.source_app = "a";
    for (int i = 0; i < 5; ++i) {
        TestStep step;
        step.event.action = Action::click;
        ElementRef ref;
        ref.text = "b" + std::to_string(i);
        step.event.target = ref;
        tc.steps.push_back(step);
    }
    return tc;
}

} // namespace

TEST_SUITE("load_test_case") {
    TEST_CASE("three click steps") {
        TestCase tc = load_test_case(kThreeClicks);
        CHECK(tc.id == "t1");
        CHECK(tc.source_app == "app_a");
        REQUIRE(tc.steps.size() == 3);
        CHECK(tc.steps[1].event.target->text == "Two");
    }

    TEST_CASE("empty steps rejected") {
        CHECK_THROWS_AS(load_test_case(R"({"id":"t","source_app":"a","steps":[]})"), SchemaError);
    }

    TEST_CASE("duplicate fields rejected") {
        CHECK_THROWS_AS(
            load_test_case(
                R"({"id":"t","id":"u","source_app":"a","steps":[{"action":"back"}]})"),
            SchemaError);
    }

    TEST_CASE("unknown fields rejected") {
        CHECK_THROWS_AS(
            load_test_case(
                R"({"id":"t","source_app":"a","steps":[{"action":"back"}],"extra":1})"),
            SchemaError);
    }

    TEST_CASE("action field coherence enforced") {
        CHECK_THROWS_AS(load_test_case(R"({"id":"t","source_app":"a","steps":[{"action":"click"}]})"),
                        SchemaError);
        CHECK_THROWS_AS(
            load_test_case(
                R"({"id":"t","source_app":"a","steps":[{"action":"back","target":{"text":"x"}}]})"),
            SchemaError);
        CHECK_THROWS_AS(
            load_test_case(
                R"({"id":"t","source_app":"a","steps":[{"action":"click","target":{"text":"x"},"value":"v"}]})"),
            SchemaError);
        CHECK_THROWS_AS(
            load_test_case(
                R"({"id":"t","source_app":"a","steps":[{"action":"click","target":{"index":1}}]})"),
            SchemaError);
    }

    TEST_CASE("save then load round-trips bytewise") {
        TestCase tc = load_test_case(kThreeClicks);
        std::string canonical = save_test_case(tc);
        TestCase again = load_test_case(canonical);
        CHECK(save_test_case(again) == canonical);
        CHECK(again == tc);
    }

    TEST_CASE("bundled fixtures load and round-trip") {
        for (const char* name :
             {"tests/abc_font_article.json", "tests/smart_font_article.json",
              "tests/fox_font_article.json", "tests/expedia_flights.json",
              "tests/notes_create.json", "tests/shop_checkout.json", "tests/music_play.json",
              "tests/bank_dark_mode.json", "tests/browser_open_pages.json"}) {
            CAPTURE(name);
            TestCase tc = load_test_case(fixture_text(name));
            CHECK(!tc.steps.empty());
            std::string canonical = save_test_case(tc);
            CHECK(save_test_case(load_test_case(canonical)) == canonical);
        }
    }
}

TEST_SUITE("build_hierarchy") {
    TEST_CASE("covering partition accepted") {
        TestCase tc = five_steps();
        std::vector<Skill> skills = {{"a", "first", 0, 2}, {"b", "second", 2, 5}};
        HierarchicalTestCase h = build_hierarchy(tc, "do the thing", skills);
        CHECK(h.skills.size() == 2);
        CHECK(h.goal == "do the thing");
    }

    TEST_CASE("gap detected") {
        TestCase tc = five_steps();
        std::vector<Skill> skills = {{"a", "first", 0, 2}, {"b", "second", 3, 5}};
        try {
            build_hierarchy(tc, "g", skills);
            FAIL("expected PartitionError");
        } catch (const PartitionError& e) {
            CHECK(std::string(e.what()).find("gap at step 2") != std::string::npos);
        }
    }

    TEST_CASE("single whole-range skill accepted") {
        TestCase tc = five_steps();
        std::vector<Skill> skills = {{"all", "everything", 0, 5}};
        CHECK_NOTHROW(build_hierarchy(tc, "g", skills));
    }

    TEST_CASE("overlap and out-of-range rejected") {
        TestCase tc = five_steps();
        CHECK_THROWS_AS(build_hierarchy(tc, "g", {{"a", "", 0, 3}, {"b", "", 2, 5}}),
                        PartitionError);
        CHECK_THROWS_AS(build_hierarchy(tc, "g", {{"a", "", 0, 6}}), PartitionError);
        CHECK_THROWS_AS(build_hierarchy(tc, "g", {{"a", "", 0, 4}}), PartitionError);
        CHECK_THROWS_AS(build_hierarchy(tc, "g", {{"a", "", 2, 2}}), PartitionError);
    }

    TEST_CASE("empty goal rejected") {
        TestCase tc = five_steps();
        CHECK_THROWS_AS(build_hierarchy(tc, "", {{"a", "", 0, 5}}), PartitionError);
    }
}

TEST_SUITE("skill_events") {
    TEST_CASE("middle slice") {
        TestCase tc = five_steps();
        HierarchicalTestCase h =
            build_hierarchy(tc, "g", {{"a", "", 0, 1}, {"b", "", 1, 3}, {"c", "", 3, 5}});
        auto steps = skill_events(h, h.skills[1]);
        REQUIRE(steps.size() == 2);
        CHECK(steps[0].event.target->text == "b1");
        CHECK(steps[1].event.target->text == "b2");
    }

    TEST_CASE("first step only") {
        TestCase tc = five_steps();
        HierarchicalTestCase h = build_hierarchy(tc, "g", {{"a", "", 0, 1}, {"b", "", 1, 5}});
        CHECK(skill_events(h, h.skills[0]).size() == 1);
    }

    TEST_CASE("full range returns all steps") {
        TestCase tc = five_steps();
        HierarchicalTestCase h = build_hierarchy(tc, "g", {{"a", "", 0, 5}});
        CHECK(skill_events(h, h.skills[0]).size() == 5);
    }

    TEST_CASE("skills partition the steps exactly") {
        TestCase tc = five_steps();
        HierarchicalTestCase h =
            build_hierarchy(tc, "g", {{"a", "", 0, 2}, {"b", "", 2, 3}, {"c", "", 3, 5}});
        size_t total = 0;
        std::vector<TestStep> concatenated;
        for (const Skill& s : h.skills) {
            total += s.hi - s.lo;
            for (const TestStep& step : skill_events(h, s)) concatenated.push_back(step);
        }
        CHECK(total == tc.steps.size());
        REQUIRE(concatenated.size() == tc.steps.size());
        for (size_t i = 0; i < tc.steps.size(); ++i) CHECK(concatenated[i] == tc.steps[i]);
    }
}

TEST_SUITE("hierarchy documents") {
    TEST_CASE("load validates against the base test") {
        TestCase tc = load_test_case(fixture_text("tests/abc_font_article.json"));
        HierarchicalTestCase h =
            load_hierarchy(fixture_text("tests/abc_font_article.hierarchy.json"), tc);
        REQUIRE(h.skills.size() == 2);
        CHECK(h.skills[0].name == "Setting Font");
        CHECK(h.skills[1].name == "Open News");
        CHECK(save_hierarchy(h) == save_hierarchy(load_hierarchy(save_hierarchy(h), tc)));
    }

    TEST_CASE("mismatched ranges rejected") {
        TestCase tc = load_test_case(kThreeClicks);
        CHECK_THROWS_AS(
            load_hierarchy(
                R"({"goal":"g","skills":[{"name":"a","description":"d","range":[0,2]}]})", tc),
            PartitionError);
    }
}
