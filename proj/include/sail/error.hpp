#pragma once

#include <stdexcept>
#include <string>

namespace sail {

// Base for every error the library raises on purpose. Anything else
// escaping is a bug.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Hierarchy dump could not be parsed. Carries the 1-based position of the
// offending byte in the input text.
class MalformedDump : public Error {
public:
    MalformedDump(const std::string& what, int line, int column)
        : Error(what + " (line " + std::to_string(line) + ", column " +
                std::to_string(column) + ")"),
          line_(line), column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

// A structured document violated its schema. `path` points at the field.
class SchemaError : public Error {
public:
    SchemaError(const std::string& what, const std::string& path)
        : Error(what + " at " + (path.empty() ? "<root>" : path)), path_(path) {}

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Skill ranges do not partition the step list.
class PartitionError : public Error {
public:
    explicit PartitionError(const std::string& what) : Error(what) {}
};

// An ElementRef matched nothing on the screen it was resolved against.
class UnresolvedTarget : public Error {
public:
    explicit UnresolvedTarget(const std::string& what) : Error(what) {}
};

class UnparseableReply : public Error {
public:
    UnparseableReply(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}

    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

class BackendUnavailable : public Error {
public:
    explicit BackendUnavailable(const std::string& what) : Error(what) {}
};

class FixtureExhausted : public Error {
public:
    explicit FixtureExhausted(const std::string& what) : Error(what) {}
};

class ProviderUnavailable : public Error {
public:
    explicit ProviderUnavailable(const std::string& what) : Error(what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(what) {}
};

class EmptyQuerySet : public Error {
public:
    explicit EmptyQuerySet(const std::string& what) : Error(what) {}
};

class EmptySuite : public Error {
public:
    explicit EmptySuite(const std::string& what) : Error(what) {}
};

class OracleMismatch : public Error {
public:
    explicit OracleMismatch(const std::string& what) : Error(what) {}
};

class NondeterministicApp : public Error {
public:
    explicit NondeterministicApp(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

} // namespace sail
