#pragma once

#include <stdexcept>
#include <string>

namespace droid {

// Invalid data, arguments, or contract violations. CLI maps this to exit 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and serialization failures. CLI maps this to exit 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested language has no grammar. Distinct from a parse failure, which is
// a verdict (AstSummary.parse_ok == false), not an exception.
class UnsupportedLanguageError : public ValidationError {
public:
    explicit UnsupportedLanguageError(const std::string& msg) : ValidationError(msg) {}
};

} // namespace droid
