#pragma once

#include <stdexcept>
#include <string>

namespace vaereg {

// Exit-code contract: 0 success, 1 validation, 2 I/O, 3 numeric.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return 1;
    if (dynamic_cast<const IoError*>(&e)) return 2;
    if (dynamic_cast<const NumericError*>(&e)) return 3;
    return 1;
}

}  // namespace vaereg
