#pragma once

#include <stdexcept>
#include <string>

namespace hulk {

// Violated domain rule: bad cluster data, infeasible plan, dimension
// mismatch. Maps to CLI exit code 1.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable/unwritable file or malformed container format. Exit code 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hulk
