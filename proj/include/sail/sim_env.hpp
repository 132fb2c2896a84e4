#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sail/driver.hpp"
#include "sail/json_util.hpp"
#include "sail/ui_model.hpp"

namespace sail {

// Values a simulated app can hold. Effects assign literals; guards compare
// against literals of the declared type.
struct SimValue {
    enum class Type { string, integer, boolean };
    Type type = Type::string;
    std::string s;
    long i = 0;
    bool b = false;

    static SimValue from_json(const Json& j, const std::string& path);
    std::string render() const; // substitution text
    bool operator==(const SimValue&) const = default;
};

struct EventMatcher {
    Action action = Action::click;
    std::optional<ElementRef> target;
    std::optional<std::string> value;
    std::optional<SwipeDirection> direction;
};

struct Guard {
    std::string variable;
    SimValue expected;
};

struct TransitionRule {
    std::string from;
    EventMatcher on;
    std::optional<Guard> guard;
    std::string to;
    std::map<std::string, SimValue> effects;
    size_t index = 0; // position in the document, for error messages
};

struct SimScreen {
    std::string id;
    UiScreen screen;                   // raw template; text may contain ${var}
    std::optional<std::string> parent; // back destination when no rule fires
};

// Declarative app: screens, typed variables, transition rules. Immutable and
// shareable once loaded; `load_app` rejects rule pairs that could both match
// one event under the same valuation.
struct SimApp {
    std::string id;
    std::string initial;
    std::map<std::string, SimValue> variables;
    std::map<std::string, SimScreen> screens;
    std::vector<TransitionRule> transitions;

    const SimScreen& screen(const std::string& id) const;
    bool has_screen(const std::string& id) const { return screens.count(id) > 0; }
};

SimApp load_app(const Json& doc);
SimApp load_app_file(const std::string& path);

// Single-owner sequential session over an immutable app.
class DriverSession : public UiDriver {
public:
    explicit DriverSession(const SimApp& app);

    UiScreen dump_hierarchy() override;
    TransitionOutcome perform(const UiEvent& event) override;
    std::string current_activity() override;

    const SimApp& app() const { return app_; }
    const std::string& current_screen_id() const { return current_; }
    const std::map<std::string, SimValue>& valuation() const { return valuation_; }
    int interaction_count() const { return interactions_; }

private:
    UiScreen rendered_current() const;

    const SimApp& app_;
    std::string current_;
    std::map<std::string, SimValue> valuation_;
    int interactions_ = 0;
};

DriverSession reset(const SimApp& app);

} // namespace sail
