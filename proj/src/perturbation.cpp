#include "csl/perturbation.hpp"

#include <cstring>
#include <stdexcept>

#include "csl/rng.hpp"

namespace csl {

PerturbationMask make_mask(const SelectionOutcome& sel, size_t patch_size,
                           double theta, uint64_t seed) {
    if (patch_size < 1) {
        throw std::invalid_argument("patch size must be >= 1");
    }
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw std::invalid_argument("masking ratio must lie in [0, 1]");
    }
    const size_t h = sel.height;
    const size_t w = sel.width;
    if (sel.hard_mask.size() != h * w) {
        throw std::invalid_argument("selection hard mask size mismatch");
    }

    const size_t grid_h = (h + patch_size - 1) / patch_size;
    const size_t grid_w = (w + patch_size - 1) / patch_size;
    std::vector<uint8_t> marked(grid_h * grid_w);
    SplitMix64 rng(seed);
    for (size_t cell = 0; cell < marked.size(); ++cell) {
        marked[cell] = rng.next_double() < theta ? 1 : 0;
    }

    PerturbationMask mask;
    mask.height = h;
    mask.width = w;
    mask.patch_size = patch_size;
    mask.ratio = theta;
    mask.seed = seed;
    mask.zero_out.resize(h * w);
    for (size_t y = 0; y < h; ++y) {
        const size_t gy = y / patch_size;
        for (size_t x = 0; x < w; ++x) {
            const size_t gx = x / patch_size;
            const size_t n = y * w + x;
            mask.zero_out[n] =
                (marked[gy * grid_w + gx] && sel.hard_mask[n]) ? 1 : 0;
        }
    }
    return mask;
}

Tensor apply_mask(const Tensor& img, const PerturbationMask& mask) {
    if (img.ndim() != 3) {
        throw std::invalid_argument("image tensor must be 3-D "
                                    "(channels, height, width)");
    }
    if (img.shape()[1] != mask.height || img.shape()[2] != mask.width) {
        throw std::invalid_argument("image and mask spatial dims differ");
    }
    Tensor out = img;
    const size_t channels = img.shape()[0];
    const size_t plane = mask.height * mask.width;
    const size_t elem = dtype_size(img.dtype());
    std::byte* data = out.bytes().data();
    for (size_t n = 0; n < plane; ++n) {
        if (!mask.zero_out[n]) continue;
        for (size_t ch = 0; ch < channels; ++ch) {
            // Zero is all-zero bytes in every supported dtype, so clearing
            // the element bytes keeps the rest of the tensor bit-exact.
            std::memset(data + (ch * plane + n) * elem, 0, elem);
        }
    }
    return out;
}

}  // namespace csl
