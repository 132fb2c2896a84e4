#include "sail/json_util.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace sail {

namespace {

// SAX frontend that forwards into a DOM while tracking object keys to catch
// duplicates, which nlohmann::json silently overwrites.
class StrictSax {
public:
    explicit StrictSax(Json& target) : dom_(target) {}

    bool null() { return dom_.null(); }
    bool boolean(bool v) { return dom_.boolean(v); }
    bool number_integer(Json::number_integer_t v) { return dom_.number_integer(v); }
    bool number_unsigned(Json::number_unsigned_t v) { return dom_.number_unsigned(v); }
    bool number_float(Json::number_float_t v, const std::string& s) {
        return dom_.number_float(v, s);
    }
    bool string(Json::string_t& v) { return dom_.string(v); }
    bool binary(Json::binary_t& v) { return dom_.binary(v); }

    bool start_object(std::size_t elements) {
        keys_.emplace_back();
        return dom_.start_object(elements);
    }

    bool key(Json::string_t& v) {
        auto& current = keys_.back();
        if (std::find(current.begin(), current.end(), v) != current.end())
            throw SchemaError("duplicate field '" + v + "'", v);
        current.push_back(v);
        return dom_.key(v);
    }

    bool end_object() {
        keys_.pop_back();
        return dom_.end_object();
    }

    bool start_array(std::size_t elements) { return dom_.start_array(elements); }
    bool end_array() { return dom_.end_array(); }

    bool parse_error(std::size_t position, const std::string& token,
                     const nlohmann::detail::exception& ex) {
        (void)token;
        throw SchemaError(std::string("invalid JSON: ") + ex.what(),
                          "byte " + std::to_string(position));
    }

    static Json parse(const std::string& text) {
        Json out;
        StrictSax sax(out);
        Json::sax_parse(text, &sax);
        return out;
    }

private:
    nlohmann::detail::json_sax_dom_parser<Json> dom_;
    std::vector<std::vector<std::string>> keys_;
};

} // namespace

Json parse_strict_json(const std::string& text) { return StrictSax::parse(text); }

Json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_strict_json(ss.str());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << content;
}

void reject_unknown_fields(const Json& obj, std::initializer_list<const char*> allowed,
                           const std::string& path) {
    if (!obj.is_object()) throw SchemaError("expected an object", path);
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* name : allowed) {
            if (it.key() == name) {
                known = true;
                break;
            }
        }
        if (!known) throw SchemaError("unknown field '" + it.key() + "'", path);
    }
}

const Json& require_field(const Json& obj, const char* name, const std::string& path) {
    auto it = obj.find(name);
    if (it == obj.end())
        throw SchemaError(std::string("missing field '") + name + "'", path);
    return *it;
}

std::string require_string(const Json& obj, const char* name, const std::string& path) {
    const Json& f = require_field(obj, name, path);
    if (!f.is_string())
        throw SchemaError(std::string("field '") + name + "' must be a string", path);
    return f.get<std::string>();
}

} // namespace sail
