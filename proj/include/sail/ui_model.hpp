#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sail/error.hpp"

namespace sail {

// Pixel rectangle in screen coordinates. Serialized form is exactly
// "[x1,y1][x2,y2]" with x1 <= x2, y1 <= y2 and non-negative coordinates.
struct Bounds {
    int x1 = 0;
    int y1 = 0;
    int x2 = 0;
    int y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    int center_x() const { return (x1 + x2) / 2; }
    int center_y() const { return (y1 + y2) / 2; }

    bool operator==(const Bounds&) const = default;

    std::string to_string() const;

    // Throws MalformedDump on syntax or invariant violations. Positions in
    // the error are relative to the bounds string itself.
    static Bounds parse(const std::string& text);
};

// True iff `candidate`'s integer center lies within `truth`, boundary
// inclusive. Integer midpoints truncate toward zero.
bool center_in_bounds(const Bounds& candidate, const Bounds& truth);

struct UiElement {
    std::string class_role;
    std::optional<std::string> resource_id;
    std::optional<std::string> text;
    std::optional<std::string> content_desc;
    std::optional<std::string> vision_desc;
    Bounds bounds;
    bool clickable = false;
    bool long_clickable = false;
    bool scrollable = false;
    bool editable = false;
    bool enabled = true;
    std::vector<UiElement> children;

    bool operator==(const UiElement&) const = default;

    // An element yields candidate events only when it is enabled and carries
    // at least one interaction flag.
    bool interactable() const {
        return enabled && (clickable || long_clickable || scrollable || editable);
    }
};

struct UiScreen {
    std::string activity;
    UiElement root;
    std::string raw_digest;

    // Tree comparison that ignores the digest of the source text.
    bool same_tree(const UiScreen& other) const {
        return activity == other.activity && root == other.root;
    }
};

enum class Action { click, long_click, input, swipe, back };
enum class SwipeDirection { up, down, left, right };

std::string to_string(Action a);
std::string to_string(SwipeDirection d);
Action action_from_string(const std::string& s);            // throws SchemaError
SwipeDirection direction_from_string(const std::string& s); // throws SchemaError

// Matcher used to re-find an element on a screen. Every populated field must
// match exactly; `index` selects the n-th match (0-based, document pre-order)
// when several elements satisfy the other fields.
struct ElementRef {
    std::optional<std::string> resource_id;
    std::optional<std::string> text;
    std::optional<std::string> content_desc;
    std::optional<std::string> class_role;
    std::optional<Bounds> bounds;
    std::optional<int> index;

    bool operator==(const ElementRef&) const = default;

    bool has_matcher() const {
        return resource_id || text || content_desc || class_role || bounds;
    }
};

struct UiEvent {
    Action action = Action::click;
    std::optional<ElementRef> target;
    std::optional<std::string> value;          // input only
    std::optional<SwipeDirection> direction;   // swipe only

    bool operator==(const UiEvent&) const = default;
};

// --- Hierarchy dump dialect -------------------------------------------------
//
// Root element <hierarchy activity="...">, nodes:
//   <node class=".." resource-id=".." text=".." content-desc=".."
//         bounds="[x1,y1][x2,y2]" clickable="true|false" long-clickable=".."
//         scrollable=".." editable=".." enabled=".."/>
// Unknown attributes are ignored; missing booleans default to false except
// `enabled` which defaults to true; empty string attributes are treated as
// absent. Exactly one root node is required.

UiScreen parse_hierarchy(const std::string& xml_text); // throws MalformedDump
std::string serialize_hierarchy(const UiScreen& screen);

// FNV-1a over the raw text, as a 16-digit hex string.
std::string content_digest(const std::string& text);

// Candidate events for a screen, in document pre-order, each interactable
// element contributing click/long_click/input/swipe events for its flags,
// plus exactly one trailing `back` event.
std::vector<UiEvent> extract_events(const UiScreen& screen);

// Structural hash: class_role, resource_id, bounds size, and the multiset of
// text/content_desc over the element's subtree. Position-independent.
std::string element_hash(const UiElement& e);

// First element matching `ref` in pre-order, or the index-th match when
// ref.index is set. Returns nullptr when nothing matches.
const UiElement* resolve_ref(const UiScreen& screen, const ElementRef& ref);

// Descriptor for an element already resolved on a screen: own text, else own
// content_desc, else text gathered from contained non-interactable
// descendants, else vision_desc, else resource id tail, else class_role.
std::string element_descriptor(const UiScreen& screen, const UiElement& element);

// Text contributed by contained non-interactable descendants (the wrapper
// aggregation rule), space-joined in pre-order. Empty when none contribute.
std::string aggregated_text(const UiElement& element);

// One-line natural language rendering of an event against the screen it will
// be performed on. Throws UnresolvedTarget when the target matches nothing.
std::string describe_event(const UiEvent& e, const UiScreen& screen);

// Rendering for events that are not bound to a screen (source-test steps,
// match-dataset documents). Uses the ref's own fields for the descriptor.
std::string describe_event(const UiEvent& e);

} // namespace sail
