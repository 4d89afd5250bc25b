#pragma once

#include <stdexcept>
#include <string>

namespace hedge {

// Categories map one-to-one onto CLI exit codes.
enum class ErrorCategory : int {
    parse = 2,
    infeasible = 3,
    numerical = 4,
    runtime = 5,
};

struct Error : std::runtime_error {
    ErrorCategory category;

    Error(ErrorCategory cat, const std::string& what)
        : std::runtime_error(what), category(cat) {}
};

inline Error parse_error(const std::string& what) { return Error(ErrorCategory::parse, what); }
inline Error infeasible_error(const std::string& what) { return Error(ErrorCategory::infeasible, what); }
inline Error numerical_error(const std::string& what) { return Error(ErrorCategory::numerical, what); }
inline Error runtime_fault(const std::string& what) { return Error(ErrorCategory::runtime, what); }

}  // namespace hedge
