#pragma once

#include <cstdint>
#include <vector>

#include "csl/features.hpp"
#include "csl/tensor.hpp"

namespace csl {

/// Generator settings for synthetic overconfident predictions with known
/// ground truth. temperature < 1 sharpens the softmax so correct and wrong
/// pixels both crowd toward confidence 1; confusion_mass concentrates a
/// wrong pixel's residual probability on its true class, which makes the
/// residual distribution bimodal there.
struct SynthConfig {
    size_t height = 128;
    size_t width = 128;
    size_t classes = 8;
    double error_rate = 0.2;      // fraction of pixels predicted wrong
    double temperature = 0.25;    // softmax temperature, > 0
    double confusion_mass = 0.6;  // residual share moved to the true class
    size_t region_seeds = 40;     // Voronoi sites for the label map
    uint64_t seed = 0;

    void validate() const;
};

struct SynthResult {
    ProbabilityMap probs;
    LabelMap gt;
    std::vector<uint8_t> correctness;   // argmax of probs equals gt
    std::vector<uint8_t> planted_wrong; // pixel was drawn as a planted error
};

/// Deterministic synthetic scene: Voronoi ground-truth labels, per-pixel
/// logits (one-hot magnitude Uniform[2,4] plus Gaussian noise sigma 0.1),
/// temperature-scaled softmax, and the confusion-mass rearrangement of wrong
/// pixels' residuals. Identical config (seed included) gives bitwise
/// identical output.
SynthResult generate(const SynthConfig& cfg);

}  // namespace csl
