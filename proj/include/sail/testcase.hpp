#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sail/json_util.hpp"
#include "sail/ui_model.hpp"

namespace sail {

// One recorded observation/action pair of a source test.
struct TestStep {
    UiEvent event;
    std::optional<std::string> screen_hint; // digest of the screen the event was taken on
    std::optional<std::string> note;

    bool operator==(const TestStep&) const = default;
};

struct TestCase {
    std::string id;
    std::string source_app;
    std::vector<TestStep> steps;
    std::optional<std::string> oracle; // reference to an oracle document

    bool operator==(const TestCase&) const = default;
};

// Named contiguous run of source-test steps, [lo, hi).
struct Skill {
    std::string name;
    std::string description;
    std::size_t lo = 0;
    std::size_t hi = 0;

    bool operator==(const Skill&) const = default;
};

// Goal / skills / events tree. Skill ranges partition [0, |steps|).
struct HierarchicalTestCase {
    std::string goal;
    std::vector<Skill> skills;
    TestCase base;
};

// Strict loader for the test-case document schema. Unknown and duplicate
// fields are rejected; errors carry the field path.
TestCase load_test_case(const std::string& doc_text);
TestCase test_case_from_json(const Json& doc);
std::string save_test_case(const TestCase& tc); // canonical form, round-trips bytewise

UiEvent load_event_doc(const Json& doc, const std::string& path);
Json event_to_json(const UiEvent& e);

// Validates the partition invariant; PartitionError names the first gap,
// overlap, or out-of-range span.
HierarchicalTestCase build_hierarchy(const TestCase& tc, const std::string& goal,
                                     const std::vector<Skill>& skills);

// Persisted alongside the test case as {"goal":…, "skills":[{name,description,range}]}.
HierarchicalTestCase load_hierarchy(const std::string& doc_text, const TestCase& tc);
std::string save_hierarchy(const HierarchicalTestCase& h);

std::vector<TestStep> skill_events(const HierarchicalTestCase& h, const Skill& s);

} // namespace sail
