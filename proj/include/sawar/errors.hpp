#pragma once

#include <stdexcept>
#include <string>

namespace sawar {

// Base of everything the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

// Non-finite gradients or losses during optimization.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Malformed CSV, checkpoint or metrics files.
class FormatError : public Error {
public:
    using Error::Error;
};

class CodecError : public Error {
public:
    using Error::Error;
};

// Undefined metric (e.g. no comparable pairs) or an incomplete aggregation cell.
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace sawar
