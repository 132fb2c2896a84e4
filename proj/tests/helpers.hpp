#pragma once

#include <string>

#include "sail/json_util.hpp"

namespace sail::test {

inline std::string fx(const std::string& rel) {
    return std::string(SAIL_FIXTURES_DIR) + "/" + rel;
}

inline std::string fixture_text(const std::string& rel) { return read_text_file(fx(rel)); }

} // namespace sail::test
