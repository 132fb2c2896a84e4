#include "sail/testcase.hpp"

namespace sail {

namespace {

ElementRef load_target(const Json& doc, const std::string& path) {
    reject_unknown_fields(doc, {"resource_id", "text", "content_desc", "class_role", "bounds", "index"},
                          path);
    ElementRef ref;
    if (doc.contains("resource_id")) ref.resource_id = doc["resource_id"].get<std::string>();
    if (doc.contains("text")) ref.text = doc["text"].get<std::string>();
    if (doc.contains("content_desc")) ref.content_desc = doc["content_desc"].get<std::string>();
    if (doc.contains("class_role")) ref.class_role = doc["class_role"].get<std::string>();
    if (doc.contains("bounds")) {
        try {
            ref.bounds = Bounds::parse(doc["bounds"].get<std::string>());
        } catch (const MalformedDump& e) {
            throw SchemaError(e.what(), path + ".bounds");
        }
    }
    if (doc.contains("index")) {
        if (!doc["index"].is_number_integer())
            throw SchemaError("index must be an integer", path + ".index");
        ref.index = doc["index"].get<int>();
    }
    if (!ref.has_matcher())
        throw SchemaError("target needs at least one matcher field", path);
    return ref;
}

Json target_to_json(const ElementRef& ref) {
    Json t = Json::object();
    if (ref.resource_id) t["resource_id"] = *ref.resource_id;
    if (ref.text) t["text"] = *ref.text;
    if (ref.content_desc) t["content_desc"] = *ref.content_desc;
    if (ref.class_role) t["class_role"] = *ref.class_role;
    if (ref.bounds) t["bounds"] = ref.bounds->to_string();
    if (ref.index) t["index"] = *ref.index;
    return t;
}

} // namespace

UiEvent load_event_doc(const Json& doc, const std::string& path) {
    reject_unknown_fields(doc, {"action", "target", "value", "direction", "note"}, path);
    UiEvent e;
    try {
        e.action = action_from_string(require_string(doc, "action", path));
    } catch (const SchemaError& err) {
        throw SchemaError(err.what(), path + ".action");
    }
    if (doc.contains("target")) e.target = load_target(doc["target"], path + ".target");
    if (doc.contains("value")) {
        if (!doc["value"].is_string()) throw SchemaError("value must be a string", path + ".value");
        e.value = doc["value"].get<std::string>();
    }
    if (doc.contains("direction"))
        e.direction = direction_from_string(doc["direction"].get<std::string>());

    switch (e.action) {
    case Action::click:
    case Action::long_click:
        if (!e.target) throw SchemaError("click events require a target", path);
        break;
    case Action::input:
        if (!e.target) throw SchemaError("input events require a target", path);
        break;
    case Action::swipe:
        break;
    case Action::back:
        if (e.target) throw SchemaError("back events take no target", path);
        break;
    }
    if (e.value && e.action != Action::input)
        throw SchemaError("value is only valid on input events", path);
    if (e.direction && e.action != Action::swipe)
        throw SchemaError("direction is only valid on swipe events", path);
    return e;
}

Json event_to_json(const UiEvent& e) {
    Json out = Json::object();
    out["action"] = to_string(e.action);
    if (e.target) out["target"] = target_to_json(*e.target);
    if (e.value) out["value"] = *e.value;
    if (e.direction) out["direction"] = to_string(*e.direction);
    return out;
}

TestCase load_test_case(const std::string& doc_text) {
    return test_case_from_json(parse_strict_json(doc_text));
}

TestCase test_case_from_json(const Json& doc) {
    reject_unknown_fields(doc, {"id", "source_app", "steps", "oracle"}, "");
    TestCase tc;
    tc.id = require_string(doc, "id", "");
    tc.source_app = require_string(doc, "source_app", "");
    const Json& steps = require_field(doc, "steps", "");
    if (!steps.is_array()) throw SchemaError("steps must be an array", "steps");
    if (steps.empty()) throw SchemaError("steps must not be empty", "steps");
    for (size_t i = 0; i < steps.size(); ++i) {
        std::string path = "steps[" + std::to_string(i) + "]";
        const Json& sdoc = steps[i];
        TestStep step;
        step.event = load_event_doc(sdoc, path);
        if (sdoc.contains("note")) step.note = sdoc["note"].get<std::string>();
        tc.steps.push_back(std::move(step));
    }
    if (doc.contains("oracle")) tc.oracle = doc["oracle"].get<std::string>();
    return tc;
}

std::string save_test_case(const TestCase& tc) {
    Json doc = Json::object();
    doc["id"] = tc.id;
    doc["source_app"] = tc.source_app;
    doc["steps"] = Json::array();
    for (const auto& step : tc.steps) {
        Json s = event_to_json(step.event);
        if (step.note) s["note"] = *step.note;
        doc["steps"].push_back(std::move(s));
    }
    if (tc.oracle) doc["oracle"] = *tc.oracle;
    return doc.dump(2) + "\n";
}

HierarchicalTestCase build_hierarchy(const TestCase& tc, const std::string& goal,
                                     const std::vector<Skill>& skills) {
    if (goal.empty()) throw PartitionError("goal must not be empty");
    if (skills.empty()) throw PartitionError("at least one skill is required");

    size_t cursor = 0;
    for (size_t i = 0; i < skills.size(); ++i) {
        const Skill& s = skills[i];
        auto span = [&] {
            return "skill '" + s.name + "' [" + std::to_string(s.lo) + "," +
                   std::to_string(s.hi) + ")";
        };
        if (s.lo >= s.hi) throw PartitionError("empty range in " + span());
        if (s.lo > cursor)
            throw PartitionError("gap at step " + std::to_string(cursor) + " before " + span());
        if (s.lo < cursor) throw PartitionError("overlap at step " + std::to_string(s.lo) +
                                                " in " + span());
        if (s.hi > tc.steps.size())
            throw PartitionError("out-of-range " + span() + " for " +
                                 std::to_string(tc.steps.size()) + " steps");
        cursor = s.hi;
    }
    if (cursor != tc.steps.size())
        throw PartitionError("gap at step " + std::to_string(cursor) + " at end of partition");

    HierarchicalTestCase h;
    h.goal = goal;
    h.skills = skills;
    h.base = tc;
    return h;
}

HierarchicalTestCase load_hierarchy(const std::string& doc_text, const TestCase& tc) {
    Json doc = parse_strict_json(doc_text);
    reject_unknown_fields(doc, {"goal", "skills"}, "");
    std::string goal = require_string(doc, "goal", "");
    const Json& skills_doc = require_field(doc, "skills", "");
    if (!skills_doc.is_array()) throw SchemaError("skills must be an array", "skills");
    std::vector<Skill> skills;
    for (size_t i = 0; i < skills_doc.size(); ++i) {
        std::string path = "skills[" + std::to_string(i) + "]";
        const Json& sdoc = skills_doc[i];
        reject_unknown_fields(sdoc, {"name", "description", "range"}, path);
        Skill s;
        s.name = require_string(sdoc, "name", path);
        s.description = require_string(sdoc, "description", path);
        const Json& range = require_field(sdoc, "range", path);
        if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() ||
            !range[1].is_number_integer())
            throw SchemaError("range must be [lo, hi]", path + ".range");
        long lo = range[0].get<long>();
        long hi = range[1].get<long>();
        if (lo < 0 || hi < 0) throw SchemaError("range must be non-negative", path + ".range");
        s.lo = static_cast<size_t>(lo);
        s.hi = static_cast<size_t>(hi);
        skills.push_back(std::move(s));
    }
    return build_hierarchy(tc, goal, skills);
}

std::string save_hierarchy(const HierarchicalTestCase& h) {
    Json doc = Json::object();
    doc["goal"] = h.goal;
    doc["skills"] = Json::array();
    for (const auto& s : h.skills) {
        Json sd = Json::object();
        sd["name"] = s.name;
        sd["description"] = s.description;
        sd["range"] = Json::array({s.lo, s.hi});
        doc["skills"].push_back(std::move(sd));
    }
    return doc.dump(2) + "\n";
}

std::vector<TestStep> skill_events(const HierarchicalTestCase& h, const Skill& s) {
    std::vector<TestStep> out;
    for (size_t i = s.lo; i < s.hi && i < h.base.steps.size(); ++i)
        out.push_back(h.base.steps[i]);
    return out;
}

} // namespace sail
