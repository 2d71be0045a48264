#pragma once

#include <stdexcept>

namespace csl {

/// Corrupt or malformed container contents (bad magic, bad header, short data).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Well-formed container requesting a feature this library does not handle
/// (dtype, byte order, storage order, format version).
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem-level read or write failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace csl
