#include "sail/sim_env.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace sail {

namespace {

ElementRef target_from_json(const Json& doc, const std::string& path) {
    reject_unknown_fields(doc, {"resource_id", "text", "content_desc", "class_role", "bounds", "index"},
                          path);
    ElementRef ref;
    if (doc.contains("resource_id")) ref.resource_id = doc["resource_id"].get<std::string>();
    if (doc.contains("text")) ref.text = doc["text"].get<std::string>();
    if (doc.contains("content_desc")) ref.content_desc = doc["content_desc"].get<std::string>();
    if (doc.contains("class_role")) ref.class_role = doc["class_role"].get<std::string>();
    if (doc.contains("bounds")) ref.bounds = Bounds::parse(doc["bounds"].get<std::string>());
    if (doc.contains("index")) ref.index = doc["index"].get<int>();
    if (!ref.has_matcher()) throw SchemaError("target needs at least one matcher field", path);
    return ref;
}

UiElement element_from_tree(const Json& doc, const std::string& path) {
    reject_unknown_fields(doc,
                          {"class", "resource_id", "text", "content_desc", "bounds", "clickable",
                           "long_clickable", "scrollable", "editable", "enabled", "children"},
                          path);
    UiElement e;
    e.class_role = doc.contains("class") ? doc["class"].get<std::string>() : "node";
    if (doc.contains("resource_id")) e.resource_id = doc["resource_id"].get<std::string>();
    if (doc.contains("text")) e.text = doc["text"].get<std::string>();
    if (doc.contains("content_desc")) e.content_desc = doc["content_desc"].get<std::string>();
    if (!doc.contains("bounds")) throw SchemaError("node is missing bounds", path);
    try {
        e.bounds = Bounds::parse(doc["bounds"].get<std::string>());
    } catch (const MalformedDump& err) {
        throw SchemaError(err.what(), path + ".bounds");
    }
    e.clickable = doc.value("clickable", false);
    e.long_clickable = doc.value("long_clickable", false);
    e.scrollable = doc.value("scrollable", false);
    e.editable = doc.value("editable", false);
    e.enabled = doc.value("enabled", true);
    if (doc.contains("children")) {
        const Json& kids = doc["children"];
        if (!kids.is_array()) throw SchemaError("children must be an array", path + ".children");
        for (size_t i = 0; i < kids.size(); ++i)
            e.children.push_back(
                element_from_tree(kids[i], path + ".children[" + std::to_string(i) + "]"));
    }
    return e;
}

Guard parse_guard(const std::string& text, const SimApp& app, const std::string& path) {
    size_t pos = text.find("==");
    if (pos == std::string::npos)
        throw SchemaError("guard must have the form var==value", path);
    Guard g;
    g.variable = text.substr(0, pos);
    std::string literal = text.substr(pos + 2);
    auto it = app.variables.find(g.variable);
    if (it == app.variables.end())
        throw SchemaError("guard references unknown variable '" + g.variable + "'", path);
    g.expected.type = it->second.type;
    switch (it->second.type) {
    case SimValue::Type::string:
        g.expected.s = literal;
        break;
    case SimValue::Type::integer:
        try {
            g.expected.i = std::stol(literal);
        } catch (const std::logic_error&) {
            throw SchemaError("guard literal '" + literal + "' is not an integer", path);
        }
        break;
    case SimValue::Type::boolean:
        if (literal != "true" && literal != "false")
            throw SchemaError("guard literal '" + literal + "' is not a boolean", path);
        g.expected.b = literal == "true";
        break;
    }
    return g;
}

void walk(const UiElement& e, const std::function<void(const UiElement&)>& fn) {
    fn(e);
    for (const auto& c : e.children) walk(c, fn);
}

// Pre-order position of an element inside a tree; -1 when absent. Works on
// the raw and the rendered tree alike since substitution keeps the shape.
int preorder_position(const UiScreen& screen, const UiElement* needle) {
    int pos = -1, counter = 0;
    walk(screen.root, [&](const UiElement& e) {
        if (&e == needle) pos = counter;
        ++counter;
    });
    return pos;
}

void validate_placeholders(const UiScreen& screen, const SimApp& app, const std::string& id) {
    walk(screen.root, [&](const UiElement& e) {
        if (!e.text) return;
        const std::string& t = *e.text;
        size_t pos = 0;
        while ((pos = t.find("${", pos)) != std::string::npos) {
            size_t end = t.find('}', pos);
            if (end == std::string::npos)
                throw SchemaError("unterminated ${…} placeholder in screen '" + id + "'",
                                  "screens." + id);
            std::string name = t.substr(pos + 2, end - pos - 2);
            if (!app.variables.count(name))
                throw SchemaError("placeholder references unknown variable '" + name + "'",
                                  "screens." + id);
            pos = end + 1;
        }
    });
}

bool guards_disjoint(const std::optional<Guard>& a, const std::optional<Guard>& b) {
    if (!a || !b) return false;
    if (a->variable != b->variable) return false;
    return !(a->expected == b->expected);
}

bool patterns_overlap(const std::optional<std::string>& a, const std::optional<std::string>& b) {
    if (!a || !b) return true;
    return *a == *b;
}

bool directions_overlap(const std::optional<SwipeDirection>& a,
                        const std::optional<SwipeDirection>& b) {
    if (!a || !b) return true;
    return *a == *b;
}

} // namespace

SimValue SimValue::from_json(const Json& j, const std::string& path) {
    SimValue v;
    if (j.is_string()) {
        v.type = Type::string;
        v.s = j.get<std::string>();
    } else if (j.is_boolean()) {
        v.type = Type::boolean;
        v.b = j.get<bool>();
    } else if (j.is_number_integer()) {
        v.type = Type::integer;
        v.i = j.get<long>();
    } else {
        throw SchemaError("variable values must be string, integer, or boolean", path);
    }
    return v;
}

std::string SimValue::render() const {
    switch (type) {
    case Type::string: return s;
    case Type::integer: return std::to_string(i);
    case Type::boolean: return b ? "true" : "false";
    }
    return "";
}

const SimScreen& SimApp::screen(const std::string& id) const {
    auto it = screens.find(id);
    if (it == screens.end()) throw ConfigError("unknown screen '" + id + "'");
    return it->second;
}

SimApp load_app(const Json& doc) {
    reject_unknown_fields(doc, {"id", "initial", "variables", "screens", "transitions"}, "");
    SimApp app;
    app.id = require_string(doc, "id", "");
    app.initial = require_string(doc, "initial", "");

    if (doc.contains("variables")) {
        const Json& vars = doc["variables"];
        if (!vars.is_object()) throw SchemaError("variables must be an object", "variables");
        for (auto it = vars.begin(); it != vars.end(); ++it)
            app.variables[it.key()] = SimValue::from_json(it.value(), "variables." + it.key());
    }

    const Json& screens = require_field(doc, "screens", "");
    if (!screens.is_object() || screens.empty())
        throw SchemaError("screens must be a non-empty object", "screens");
    for (auto it = screens.begin(); it != screens.end(); ++it) {
        const std::string& id = it.key();
        std::string path = "screens." + id;
        SimScreen s;
        s.id = id;
        if (it.value().is_string()) {
            try {
                s.screen = parse_hierarchy(it.value().get<std::string>());
            } catch (const MalformedDump& e) {
                throw SchemaError(e.what(), path);
            }
        } else if (it.value().is_object()) {
            const Json& sdoc = it.value();
            reject_unknown_fields(sdoc, {"activity", "parent", "xml", "tree"}, path);
            if (sdoc.contains("xml") == sdoc.contains("tree"))
                throw SchemaError("screen needs exactly one of xml or tree", path);
            if (sdoc.contains("xml")) {
                try {
                    s.screen = parse_hierarchy(sdoc["xml"].get<std::string>());
                } catch (const MalformedDump& e) {
                    throw SchemaError(e.what(), path + ".xml");
                }
            } else {
                s.screen.root = element_from_tree(sdoc["tree"], path + ".tree");
                s.screen.activity = id;
            }
            if (sdoc.contains("activity")) s.screen.activity = sdoc["activity"].get<std::string>();
            if (sdoc.contains("parent")) s.parent = sdoc["parent"].get<std::string>();
        } else {
            throw SchemaError("screen must be an XML string or an object", path);
        }
        if (s.screen.raw_digest.empty())
            s.screen.raw_digest = content_digest(serialize_hierarchy(s.screen));
        app.screens.emplace(id, std::move(s));
    }

    if (!app.has_screen(app.initial))
        throw SchemaError("initial screen '" + app.initial + "' does not exist", "initial");
    for (const auto& [id, s] : app.screens) {
        if (s.parent && !app.has_screen(*s.parent))
            throw SchemaError("parent screen '" + *s.parent + "' of '" + id + "' does not exist",
                              "screens." + id);
        validate_placeholders(s.screen, app, id);
    }

    if (doc.contains("transitions")) {
        const Json& rules = doc["transitions"];
        if (!rules.is_array()) throw SchemaError("transitions must be an array", "transitions");
        for (size_t i = 0; i < rules.size(); ++i) {
            std::string path = "transitions[" + std::to_string(i) + "]";
            const Json& rdoc = rules[i];
            reject_unknown_fields(rdoc, {"from", "on", "guard", "to", "effects"}, path);
            TransitionRule rule;
            rule.index = i;
            rule.from = require_string(rdoc, "from", path);
            rule.to = require_string(rdoc, "to", path);
            if (!app.has_screen(rule.from))
                throw SchemaError("rule source screen '" + rule.from + "' does not exist", path);
            if (!app.has_screen(rule.to))
                throw SchemaError("rule destination screen '" + rule.to + "' does not exist", path);

            const Json& on = require_field(rdoc, "on", path);
            reject_unknown_fields(on, {"action", "target", "value", "direction"}, path + ".on");
            rule.on.action = action_from_string(require_string(on, "action", path + ".on"));
            if (on.contains("target"))
                rule.on.target = target_from_json(on["target"], path + ".on.target");
            if (on.contains("value")) rule.on.value = on["value"].get<std::string>();
            if (on.contains("direction"))
                rule.on.direction = direction_from_string(on["direction"].get<std::string>());

            if (rule.on.target) {
                const SimScreen& from = app.screen(rule.from);
                if (!resolve_ref(from.screen, *rule.on.target))
                    throw SchemaError("rule target does not resolve on screen '" + rule.from + "'",
                                      path + ".on.target");
            }

            if (rdoc.contains("guard"))
                rule.guard = parse_guard(rdoc["guard"].get<std::string>(), app, path + ".guard");

            if (rdoc.contains("effects")) {
                const Json& effects = rdoc["effects"];
                if (!effects.is_object())
                    throw SchemaError("effects must be an object", path + ".effects");
                for (auto it = effects.begin(); it != effects.end(); ++it) {
                    auto var = app.variables.find(it.key());
                    if (var == app.variables.end())
                        throw SchemaError("effect assigns unknown variable '" + it.key() + "'",
                                          path + ".effects");
                    SimValue v = SimValue::from_json(it.value(), path + ".effects." + it.key());
                    if (v.type != var->second.type)
                        throw SchemaError("effect type mismatch for variable '" + it.key() + "'",
                                          path + ".effects." + it.key());
                    rule.effects[it.key()] = std::move(v);
                }
            }
            app.transitions.push_back(std::move(rule));
        }
    }

    // Eager determinism check: no two rules may match the same event under a
    // shared valuation.
    for (size_t a = 0; a < app.transitions.size(); ++a) {
        for (size_t b = a + 1; b < app.transitions.size(); ++b) {
            const TransitionRule& ra = app.transitions[a];
            const TransitionRule& rb = app.transitions[b];
            if (ra.from != rb.from || ra.on.action != rb.on.action) continue;
            if (static_cast<bool>(ra.on.target) != static_cast<bool>(rb.on.target)) continue;
            if (ra.on.target) {
                const UiScreen& tpl = app.screen(ra.from).screen;
                const UiElement* ea = resolve_ref(tpl, *ra.on.target);
                const UiElement* eb = resolve_ref(tpl, *rb.on.target);
                if (ea != eb) continue;
            }
            if (!patterns_overlap(ra.on.value, rb.on.value)) continue;
            if (!directions_overlap(ra.on.direction, rb.on.direction)) continue;
            if (guards_disjoint(ra.guard, rb.guard)) continue;
            throw NondeterministicApp("rules " + std::to_string(ra.index) + " and " +
                                      std::to_string(rb.index) + " on screen '" + ra.from +
                                      "' can match the same event");
        }
    }

    return app;
}

SimApp load_app_file(const std::string& path) { return load_app(load_json_file(path)); }

DriverSession::DriverSession(const SimApp& app)
    : app_(app), current_(app.initial), valuation_(app.variables) {}

DriverSession reset(const SimApp& app) { return DriverSession(app); }

UiScreen DriverSession::rendered_current() const {
    UiScreen rendered = app_.screen(current_).screen;
    std::function<void(UiElement&)> substitute = [&](UiElement& e) {
        if (e.text) {
            std::string t = *e.text;
            size_t pos = 0;
            while ((pos = t.find("${", pos)) != std::string::npos) {
                size_t end = t.find('}', pos);
                if (end == std::string::npos) break;
                std::string name = t.substr(pos + 2, end - pos - 2);
                auto it = valuation_.find(name);
                if (it != valuation_.end()) {
                    std::string value = it->second.render();
                    t.replace(pos, end - pos + 1, value);
                    pos += value.size();
                } else {
                    pos = end + 1;
                }
            }
            e.text = t;
        }
        for (auto& c : e.children) substitute(c);
    };
    substitute(rendered.root);
    return rendered;
}

UiScreen DriverSession::dump_hierarchy() {
    // Sim output flows through the same dialect as real dumps.
    return parse_hierarchy(serialize_hierarchy(rendered_current()));
}

std::string DriverSession::current_activity() {
    return app_.screen(current_).screen.activity;
}

TransitionOutcome DriverSession::perform(const UiEvent& event) {
    ++interactions_;
    UiScreen rendered = rendered_current();

    const UiElement* target_element = nullptr;
    if (event.target) {
        target_element = resolve_ref(rendered, *event.target);
        if (!target_element)
            return TransitionOutcome::rejected("target matches no element on screen '" +
                                               current_ + "'");
        bool usable = target_element->enabled;
        if (usable) {
            switch (event.action) {
            case Action::click: usable = target_element->clickable; break;
            case Action::long_click: usable = target_element->long_clickable; break;
            case Action::input: usable = target_element->editable; break;
            case Action::swipe: usable = target_element->scrollable; break;
            case Action::back: usable = true; break;
            }
        }
        if (!usable) return TransitionOutcome::rejected("target not interactable");
    }

    int event_pos = target_element ? preorder_position(rendered, target_element) : -1;
    const UiScreen& raw = app_.screen(current_).screen;

    const TransitionRule* matched = nullptr;
    for (const auto& rule : app_.transitions) {
        if (rule.from != current_ || rule.on.action != event.action) continue;
        if (static_cast<bool>(rule.on.target) != static_cast<bool>(event.target)) continue;
        if (rule.on.target) {
            const UiElement* rule_element = resolve_ref(raw, *rule.on.target);
            if (preorder_position(raw, rule_element) != event_pos) continue;
        }
        if (rule.on.value && event.value != rule.on.value) continue;
        if (rule.on.direction && event.direction != rule.on.direction) continue;
        if (rule.guard) {
            auto it = valuation_.find(rule.guard->variable);
            if (it == valuation_.end() || !(it->second == rule.guard->expected)) continue;
        }
        matched = &rule;
        break;
    }

    if (matched) {
        for (const auto& [name, value] : matched->effects) valuation_[name] = value;
        current_ = matched->to;
        return TransitionOutcome::transitioned(current_);
    }

    if (event.action == Action::back) {
        const SimScreen& here = app_.screen(current_);
        if (here.parent) {
            current_ = *here.parent;
            return TransitionOutcome::transitioned(current_);
        }
    }
    return TransitionOutcome::no_op();
}

} // namespace sail
