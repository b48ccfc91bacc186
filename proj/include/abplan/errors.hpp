#pragma once

#include <stdexcept>
#include <string>

namespace abplan {

// Raised when an estimator cannot produce a value from the given data
// (zero control mean, no usable day pairs, mismatched panels, ...).
class estimation_error : public std::runtime_error {
public:
    explicit estimation_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised on file or parse failures.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace abplan
