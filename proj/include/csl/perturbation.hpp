#pragma once

#include <cstdint>
#include <vector>

#include "csl/separation.hpp"
#include "csl/tensor.hpp"

namespace csl {

/// Patch-grid perturbation: which pixels of the reliable region get their
/// content removed.
struct PerturbationMask {
    size_t height = 0;
    size_t width = 0;
    std::vector<uint8_t> zero_out;  // per pixel, 1 = remove content
    size_t patch_size = 32;
    double ratio = 0.7;
    uint64_t seed = 0;
};

/// Draws one Uniform[0,1) value per cell of the ceil(H/s) x ceil(W/s) patch
/// grid (row-major, seeded) and marks the cell when the draw is below theta.
/// A pixel is zeroed when its patch is marked AND it is hard-selected in
/// sel; unreliable pixels are never zeroed. Edge patches smaller than s x s
/// get their own draw.
PerturbationMask make_mask(const SelectionOutcome& sel, size_t patch_size,
                           double theta, uint64_t seed);

/// Copy of a C x H x W tensor with every channel of the zeroed pixels set to
/// 0; all other bytes are preserved exactly.
Tensor apply_mask(const Tensor& img, const PerturbationMask& mask);

}  // namespace csl
