#pragma once

#include <stdexcept>
#include <string>

namespace vine {

/// Precondition violation on caller-supplied data (bad lengths, non-finite values, ranges).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Run directory problems: missing manifest, malformed lines, out-of-order writes, I/O failures.
class ArchiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace vine
