#pragma once

#include <stdexcept>
#include <string>

namespace carnot {

// Bad input: malformed configuration, violated structural hypothesis, out-of-domain query.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not produce a trustworthy answer.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace carnot
