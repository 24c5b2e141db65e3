#pragma once

#include <stdexcept>
#include <string>

namespace oikg {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover the remaining failure classes so callers (and the CLI exit-code
// mapping) can tell them apart.

class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

class DegeneratePoseError : public std::invalid_argument {
public:
    explicit DegeneratePoseError(const std::string& what) : std::invalid_argument(what) {}
};

class IllegalActionError : public std::invalid_argument {
public:
    explicit IllegalActionError(const std::string& what) : std::invalid_argument(what) {}
};

class GenerationError : public std::runtime_error {
public:
    explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

class InvalidStateError : public std::logic_error {
public:
    explicit InvalidStateError(const std::string& what) : std::logic_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace oikg
