#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "sail/error.hpp"

namespace sail {

using Json = nlohmann::ordered_json;

// Parses JSON text rejecting duplicate object keys. Fixture documents double
// as ground truth; silent key shadowing is not acceptable.
Json parse_strict_json(const std::string& text);

Json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Rejects fields outside `allowed`. `path` is used in the error message.
void reject_unknown_fields(const Json& obj, std::initializer_list<const char*> allowed,
                           const std::string& path);

const Json& require_field(const Json& obj, const char* name, const std::string& path);
std::string require_string(const Json& obj, const char* name, const std::string& path);

} // namespace sail
