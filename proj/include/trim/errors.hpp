#pragma once

#include <stdexcept>
#include <string>

namespace trim {

// Error taxonomy mirrors the CLI exit codes:
//   usage_error -> 2, shape_error/format_error -> 3, budget_error/numeric_error -> 4.

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct budget_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace trim
