#pragma once

#include <stdexcept>
#include <string>

namespace pecmmv {

// Bad input data: malformed files, inconsistent shapes, violated preconditions
// on measured data. Maps to CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Solver or forward-model breakdown (NaN iterates, ill-conditioned systems,
// non-convergent series). Maps to CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration: unknown keys, unparsable values. Maps to CLI exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pecmmv
