#include "sail/ui_model.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <sstream>

namespace sail {

namespace {

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
           c == ':' || c == '.';
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c; break;
        }
    }
    return out;
}

// Cursor over the dump text with 1-based line/column tracking.
class Cursor {
public:
    explicit Cursor(const std::string& text) : text_(text) {}

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }

    char get() {
        char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    bool consume(const std::string& lit) {
        if (text_.compare(pos_, lit.size(), lit) != 0) return false;
        for (size_t i = 0; i < lit.size(); ++i) get();
        return true;
    }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) get();
    }

    int line() const { return line_; }
    int col() const { return col_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw MalformedDump(what, line_, col_);
    }

private:
    const std::string& text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

std::string decode_entities(const std::string& raw, Cursor& at) {
    std::string out;
    for (size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != '&') {
            out += raw[i];
            continue;
        }
        size_t semi = raw.find(';', i);
        if (semi == std::string::npos) at.fail("unterminated entity");
        std::string ent = raw.substr(i + 1, semi - i - 1);
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (!ent.empty() && ent[0] == '#') {
            int base = 10;
            std::string digits = ent.substr(1);
            if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
                base = 16;
                digits = digits.substr(1);
            }
            try {
                long code = std::stol(digits, nullptr, base);
                if (code < 0 || code > 0x10FFFF) at.fail("character reference out of range");
                // Dumps are effectively ASCII; encode the common case only.
                if (code < 0x80) {
                    out += static_cast<char>(code);
                } else {
                    at.fail("non-ASCII character reference unsupported");
                }
            } catch (const std::logic_error&) {
                at.fail("bad character reference");
            }
        } else {
            at.fail("unknown entity '&" + ent + ";'");
        }
        i = semi;
    }
    return out;
}

struct RawTag {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;
    bool self_closing = false;
    bool closing = false; // </name>
    int line = 0;
    int col = 0;
};

// Parses one tag starting at '<'. Comments and the XML prolog are skipped by
// the caller.
RawTag parse_tag(Cursor& cur) {
    RawTag tag;
    tag.line = cur.line();
    tag.col = cur.col();
    if (cur.peek() != '<') cur.fail("expected '<'");
    cur.get();
    if (cur.peek() == '/') {
        cur.get();
        tag.closing = true;
    }
    if (!is_name_char(cur.peek())) cur.fail("expected tag name");
    while (!cur.eof() && is_name_char(cur.peek())) tag.name += cur.get();
    for (;;) {
        cur.skip_ws();
        if (cur.eof()) cur.fail("unterminated tag");
        if (cur.peek() == '/') {
            cur.get();
            if (cur.peek() != '>') cur.fail("expected '>' after '/'");
            cur.get();
            tag.self_closing = true;
            return tag;
        }
        if (cur.peek() == '>') {
            cur.get();
            return tag;
        }
        if (tag.closing) cur.fail("attributes not allowed in closing tag");
        std::string name;
        if (!is_name_char(cur.peek())) cur.fail("expected attribute name");
        while (!cur.eof() && is_name_char(cur.peek())) name += cur.get();
        cur.skip_ws();
        if (cur.peek() != '=') cur.fail("expected '=' after attribute name");
        cur.get();
        cur.skip_ws();
        char quote = cur.peek();
        if (quote != '"' && quote != '\'') cur.fail("expected quoted attribute value");
        cur.get();
        std::string raw;
        while (!cur.eof() && cur.peek() != quote) {
            if (cur.peek() == '<') cur.fail("'<' in attribute value");
            raw += cur.get();
        }
        if (cur.eof()) cur.fail("unterminated attribute value");
        cur.get();
        tag.attrs.emplace_back(name, decode_entities(raw, cur));
    }
}

std::optional<std::string> attr_of(const RawTag& tag, const std::string& name) {
    for (const auto& [k, v] : tag.attrs) {
        if (k == name) {
            if (v.empty()) return std::nullopt; // empty attribute == absent
            return v;
        }
    }
    return std::nullopt;
}

bool bool_attr(const RawTag& tag, const std::string& name, bool def) {
    for (const auto& [k, v] : tag.attrs) {
        if (k == name) return v == "true";
    }
    return def;
}

Bounds parse_bounds_at(const std::string& text, int line, int col) {
    try {
        return Bounds::parse(text);
    } catch (const MalformedDump& e) {
        throw MalformedDump(std::string("bad bounds \"") + text + "\": " + e.what(), line, col);
    }
}

UiElement element_from_tag(const RawTag& tag) {
    UiElement e;
    e.class_role = attr_of(tag, "class").value_or("node");
    e.resource_id = attr_of(tag, "resource-id");
    e.text = attr_of(tag, "text");
    e.content_desc = attr_of(tag, "content-desc");
    auto bounds = attr_of(tag, "bounds");
    if (!bounds) throw MalformedDump("node is missing bounds", tag.line, tag.col);
    e.bounds = parse_bounds_at(*bounds, tag.line, tag.col);
    e.clickable = bool_attr(tag, "clickable", false);
    e.long_clickable = bool_attr(tag, "long-clickable", false);
    e.scrollable = bool_attr(tag, "scrollable", false);
    e.editable = bool_attr(tag, "editable", false);
    e.enabled = bool_attr(tag, "enabled", true);
    return e;
}

void skip_misc(Cursor& cur) {
    for (;;) {
        cur.skip_ws();
        if (cur.consume("<?")) {
            while (!cur.eof() && !cur.consume("?>")) cur.get();
            continue;
        }
        if (cur.consume("<!--")) {
            while (!cur.eof() && !cur.consume("-->")) cur.get();
            continue;
        }
        return;
    }
}

void append_subtree_text(const UiElement& e, std::vector<std::string>& out) {
    if (e.text) out.push_back(*e.text);
    if (e.content_desc) out.push_back(*e.content_desc);
    for (const auto& c : e.children) append_subtree_text(c, out);
}

bool bounds_inside(const Bounds& inner, const Bounds& outer) {
    return inner.x1 >= outer.x1 && inner.y1 >= outer.y1 && inner.x2 <= outer.x2 &&
           inner.y2 <= outer.y2;
}

// Text contributed to an interactable element by its contained
// non-interactable descendants. Stops at nested interactable elements; those
// own their subtrees.
void gather_contained_text(const UiElement& owner, const UiElement& node,
                           std::vector<std::string>& out) {
    for (const auto& child : node.children) {
        if (child.interactable()) continue;
        if (bounds_inside(child.bounds, owner.bounds)) {
            if (child.text) out.push_back(*child.text);
            else if (child.content_desc) out.push_back(*child.content_desc);
        }
        gather_contained_text(owner, child, out);
    }
}

void walk_preorder(const UiElement& e, const std::function<void(const UiElement&)>& fn) {
    fn(e);
    for (const auto& c : e.children) walk_preorder(c, fn);
}

std::string fnv1a_hex(const std::string& data) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

std::string id_tail(const std::string& id) {
    auto pos = id.find_last_of('/');
    return pos == std::string::npos ? id : id.substr(pos + 1);
}

std::string ref_descriptor(const ElementRef& ref) {
    if (ref.text) return *ref.text;
    if (ref.content_desc) return *ref.content_desc;
    if (ref.resource_id) return id_tail(*ref.resource_id);
    if (ref.class_role) return *ref.class_role;
    return "element";
}

std::string render_event(Action action, const std::optional<std::string>& value,
                         const std::optional<SwipeDirection>& direction,
                         const std::optional<std::string>& descriptor) {
    switch (action) {
    case Action::back:
        return "press back";
    case Action::click:
        return "click " + quote(descriptor.value_or("element"));
    case Action::long_click:
        return "long click " + quote(descriptor.value_or("element"));
    case Action::input:
        if (value) return "type " + quote(*value) + " into " + quote(descriptor.value_or("element"));
        return "type into " + quote(descriptor.value_or("element"));
    case Action::swipe: {
        std::string out = "swipe";
        if (direction) out += " " + to_string(*direction);
        if (descriptor) out += " on " + quote(*descriptor);
        return out;
    }
    }
    return "event";
}

} // namespace

std::string Bounds::to_string() const {
    std::ostringstream os;
    os << '[' << x1 << ',' << y1 << "][" << x2 << ',' << y2 << ']';
    return os.str();
}

Bounds Bounds::parse(const std::string& text) {
    size_t pos = 0;
    auto fail = [&](const std::string& what) -> int {
        throw MalformedDump(what, 1, static_cast<int>(pos) + 1);
    };
    auto expect = [&](char c) {
        if (pos >= text.size() || text[pos] != c)
            fail(std::string("expected '") + c + "' in bounds");
        ++pos;
    };
    auto number = [&]() {
        bool neg = false;
        if (pos < text.size() && text[pos] == '-') {
            neg = true;
            ++pos;
        }
        if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
            fail("expected number in bounds");
        long v = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            v = v * 10 + (text[pos] - '0');
            if (v > 1000000000L) fail("bounds coordinate too large");
            ++pos;
        }
        return neg ? -v : v;
    };

    Bounds b;
    expect('[');
    b.x1 = static_cast<int>(number());
    expect(',');
    b.y1 = static_cast<int>(number());
    expect(']');
    expect('[');
    b.x2 = static_cast<int>(number());
    expect(',');
    b.y2 = static_cast<int>(number());
    expect(']');
    if (pos != text.size()) fail("trailing characters after bounds");
    if (b.x1 < 0 || b.y1 < 0 || b.x2 < 0 || b.y2 < 0) fail("negative bounds coordinate");
    if (b.x1 > b.x2) fail("x1 > x2 in bounds");
    if (b.y1 > b.y2) fail("y1 > y2 in bounds");
    return b;
}

bool center_in_bounds(const Bounds& candidate, const Bounds& truth) {
    int cx = candidate.center_x();
    int cy = candidate.center_y();
    return cx >= truth.x1 && cx <= truth.x2 && cy >= truth.y1 && cy <= truth.y2;
}

std::string to_string(Action a) {
    switch (a) {
    case Action::click: return "click";
    case Action::long_click: return "long_click";
    case Action::input: return "input";
    case Action::swipe: return "swipe";
    case Action::back: return "back";
    }
    return "click";
}

std::string to_string(SwipeDirection d) {
    switch (d) {
    case SwipeDirection::up: return "up";
    case SwipeDirection::down: return "down";
    case SwipeDirection::left: return "left";
    case SwipeDirection::right: return "right";
    }
    return "down";
}

Action action_from_string(const std::string& s) {
    if (s == "click") return Action::click;
    if (s == "long_click") return Action::long_click;
    if (s == "input") return Action::input;
    if (s == "swipe") return Action::swipe;
    if (s == "back") return Action::back;
    throw SchemaError("unknown action '" + s + "'", "action");
}

SwipeDirection direction_from_string(const std::string& s) {
    if (s == "up") return SwipeDirection::up;
    if (s == "down") return SwipeDirection::down;
    if (s == "left") return SwipeDirection::left;
    if (s == "right") return SwipeDirection::right;
    throw SchemaError("unknown direction '" + s + "'", "direction");
}

UiScreen parse_hierarchy(const std::string& xml_text) {
    Cursor cur(xml_text);
    skip_misc(cur);
    if (cur.eof()) cur.fail("empty document");

    RawTag root_tag = parse_tag(cur);
    if (root_tag.name != "hierarchy" || root_tag.closing)
        throw MalformedDump("expected <hierarchy> root element", root_tag.line, root_tag.col);

    UiScreen screen;
    screen.activity = attr_of(root_tag, "activity").value_or("unknown");
    screen.raw_digest = content_digest(xml_text);

    if (root_tag.self_closing)
        throw MalformedDump("hierarchy has no root node", root_tag.line, root_tag.col);

    std::vector<UiElement*> stack;
    std::optional<UiElement> root_node;
    bool closed = false;

    for (;;) {
        skip_misc(cur);
        if (cur.eof()) cur.fail("unterminated document");
        if (cur.peek() != '<') cur.fail("unexpected text content");
        RawTag tag = parse_tag(cur);
        if (tag.closing) {
            if (tag.name == "hierarchy") {
                if (!stack.empty())
                    throw MalformedDump("unclosed <node>", tag.line, tag.col);
                closed = true;
                break;
            }
            if (tag.name == "node") {
                if (stack.empty())
                    throw MalformedDump("stray </node>", tag.line, tag.col);
                stack.pop_back();
                continue;
            }
            throw MalformedDump("unexpected closing tag </" + tag.name + ">", tag.line, tag.col);
        }
        if (tag.name != "node")
            throw MalformedDump("unexpected element <" + tag.name + ">", tag.line, tag.col);

        UiElement node = element_from_tag(tag);
        if (stack.empty()) {
            if (root_node)
                throw MalformedDump("multiple root nodes", tag.line, tag.col);
            root_node = std::move(node);
            if (!tag.self_closing) stack.push_back(&*root_node);
        } else {
            stack.back()->children.push_back(std::move(node));
            if (!tag.self_closing) stack.push_back(&stack.back()->children.back());
        }
    }

    if (!closed || !root_node)
        throw MalformedDump("hierarchy has no root node", 1, 1);

    skip_misc(cur);
    if (!cur.eof()) cur.fail("trailing content after </hierarchy>");

    screen.root = std::move(*root_node);
    return screen;
}

namespace {

void serialize_node(const UiElement& e, std::ostringstream& os, int depth) {
    std::string indent(static_cast<size_t>(depth) * 2, ' ');
    os << indent << "<node class=\"" << xml_escape(e.class_role) << "\"";
    if (e.resource_id) os << " resource-id=\"" << xml_escape(*e.resource_id) << "\"";
    if (e.text) os << " text=\"" << xml_escape(*e.text) << "\"";
    if (e.content_desc) os << " content-desc=\"" << xml_escape(*e.content_desc) << "\"";
    os << " bounds=\"" << e.bounds.to_string() << "\""
       << " clickable=\"" << (e.clickable ? "true" : "false") << "\""
       << " long-clickable=\"" << (e.long_clickable ? "true" : "false") << "\""
       << " scrollable=\"" << (e.scrollable ? "true" : "false") << "\""
       << " editable=\"" << (e.editable ? "true" : "false") << "\""
       << " enabled=\"" << (e.enabled ? "true" : "false") << "\"";
    if (e.children.empty()) {
        os << "/>\n";
        return;
    }
    os << ">\n";
    for (const auto& c : e.children) serialize_node(c, os, depth + 1);
    os << indent << "</node>\n";
}

} // namespace

std::string serialize_hierarchy(const UiScreen& screen) {
    std::ostringstream os;
    os << "<hierarchy activity=\"" << xml_escape(screen.activity) << "\">\n";
    serialize_node(screen.root, os, 1);
    os << "</hierarchy>\n";
    return os.str();
}

std::string content_digest(const std::string& text) { return fnv1a_hex(text); }

std::vector<UiEvent> extract_events(const UiScreen& screen) {
    std::vector<UiEvent> events;

    // Refs are disambiguated by an ordinal when several elements share the
    // same identifying fields.
    std::vector<const UiElement*> order;
    walk_preorder(screen.root, [&](const UiElement& e) { order.push_back(&e); });

    auto make_ref = [&](const UiElement& e) {
        ElementRef ref;
        ref.class_role = e.class_role;
        ref.resource_id = e.resource_id;
        ref.text = e.text;
        ref.content_desc = e.content_desc;
        ref.bounds = e.bounds;
        int matches = 0, ordinal = -1;
        for (const UiElement* other : order) {
            bool same = other->class_role == e.class_role && other->resource_id == e.resource_id &&
                        other->text == e.text && other->content_desc == e.content_desc &&
                        other->bounds == e.bounds;
            if (same) {
                if (other == &e) ordinal = matches;
                ++matches;
            }
        }
        if (matches > 1) ref.index = ordinal;
        return ref;
    };

    for (const UiElement* e : order) {
        if (!e->interactable()) continue;
        ElementRef ref = make_ref(*e);
        if (e->clickable) events.push_back({Action::click, ref, std::nullopt, std::nullopt});
        if (e->long_clickable) events.push_back({Action::long_click, ref, std::nullopt, std::nullopt});
        if (e->editable) events.push_back({Action::input, ref, std::nullopt, std::nullopt});
        if (e->scrollable) events.push_back({Action::swipe, ref, std::nullopt, std::nullopt});
    }
    events.push_back({Action::back, std::nullopt, std::nullopt, std::nullopt});
    return events;
}

std::string element_hash(const UiElement& e) {
    std::vector<std::string> texts;
    append_subtree_text(e, texts);
    std::sort(texts.begin(), texts.end());
    std::ostringstream os;
    os << e.class_role << '\x1f' << e.resource_id.value_or("") << '\x1f' << e.bounds.width()
       << 'x' << e.bounds.height();
    for (const auto& t : texts) os << '\x1f' << t;
    return fnv1a_hex(os.str());
}

const UiElement* resolve_ref(const UiScreen& screen, const ElementRef& ref) {
    std::vector<const UiElement*> matches;
    walk_preorder(screen.root, [&](const UiElement& e) {
        if (ref.class_role && e.class_role != *ref.class_role) return;
        if (ref.resource_id && e.resource_id != ref.resource_id) return;
        if (ref.text && e.text != ref.text) return;
        if (ref.content_desc && e.content_desc != ref.content_desc) return;
        if (ref.bounds && !(e.bounds == *ref.bounds)) return;
        matches.push_back(&e);
    });
    if (matches.empty()) return nullptr;
    if (ref.index) {
        if (*ref.index < 0 || static_cast<size_t>(*ref.index) >= matches.size()) return nullptr;
        return matches[static_cast<size_t>(*ref.index)];
    }
    return matches.front();
}

std::string aggregated_text(const UiElement& element) {
    std::vector<std::string> gathered;
    gather_contained_text(element, element, gathered);
    std::string joined;
    for (size_t i = 0; i < gathered.size(); ++i) {
        if (i) joined += ' ';
        joined += gathered[i];
    }
    return joined;
}

std::string element_descriptor(const UiScreen& screen, const UiElement& element) {
    (void)screen;
    if (element.text) return *element.text;
    if (element.content_desc) return *element.content_desc;
    if (element.interactable()) {
        std::string gathered = aggregated_text(element);
        if (!gathered.empty()) return gathered;
    }
    if (element.vision_desc) return *element.vision_desc;
    if (element.resource_id) return id_tail(*element.resource_id);
    return element.class_role;
}

std::string describe_event(const UiEvent& e, const UiScreen& screen) {
    if (e.action == Action::back) return "press back";
    std::optional<std::string> descriptor;
    if (e.target) {
        const UiElement* el = resolve_ref(screen, *e.target);
        if (!el) throw UnresolvedTarget("event target matches no element on screen '" +
                                        screen.activity + "'");
        descriptor = element_descriptor(screen, *el);
    }
    return render_event(e.action, e.value, e.direction, descriptor);
}

std::string describe_event(const UiEvent& e) {
    if (e.action == Action::back) return "press back";
    std::optional<std::string> descriptor;
    if (e.target) descriptor = ref_descriptor(*e.target);
    return render_event(e.action, e.value, e.direction, descriptor);
}

} // namespace sail
