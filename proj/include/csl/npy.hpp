#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csl/tensor.hpp"

namespace csl::npy {

/// Parses a NPY version 1.0 buffer. Accepts little-endian f4/f8, u1 and i4,
/// C order only. Throws UnsupportedError for well-formed files requesting
/// anything else (other dtypes, Fortran order, format versions 2/3) and
/// FormatError for corrupt or truncated buffers.
Tensor from_bytes(std::span<const std::byte> buffer);

/// Serializes a tensor as NPY version 1.0 with the same header layout
/// numpy itself writes: the dictionary literal is padded with spaces plus a
/// trailing newline so the data section starts on a 64-byte boundary.
std::vector<std::byte> to_bytes(const Tensor& t);

/// File wrappers around from_bytes/to_bytes. Filesystem failures raise
/// IoError. write_array writes to a temporary sibling and renames it so a
/// failed write never leaves a partial file behind.
Tensor read_array(const std::string& path);
void write_array(const std::string& path, const Tensor& t);

}  // namespace csl::npy
