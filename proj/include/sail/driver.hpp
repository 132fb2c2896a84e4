#pragma once

#include <string>

#include "sail/ui_model.hpp"

namespace sail {

// Result of performing one event on the app under test.
struct TransitionOutcome {
    enum class Kind { transitioned, no_op, rejected };

    Kind kind = Kind::no_op;
    std::string screen_id; // destination when transitioned
    std::string reason;    // populated when rejected

    static TransitionOutcome transitioned(std::string to) {
        return {Kind::transitioned, std::move(to), ""};
    }
    static TransitionOutcome no_op() { return {Kind::no_op, "", ""}; }
    static TransitionOutcome rejected(std::string reason) {
        return {Kind::rejected, "", std::move(reason)};
    }
};

// What the planners drive. The simulator implements it; a real device
// adapter would satisfy the same surface.
class UiDriver {
public:
    virtual ~UiDriver() = default;

    virtual UiScreen dump_hierarchy() = 0;
    virtual TransitionOutcome perform(const UiEvent& event) = 0;
    virtual std::string current_activity() = 0;
};

} // namespace sail
