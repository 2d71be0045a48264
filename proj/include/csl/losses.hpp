#pragma once

#include <span>
#include <string>

#include "csl/features.hpp"
#include "csl/tensor.hpp"

namespace csl {

/// Spatial reduction of the weighted cross-entropy: divide by the number of
/// valid pixels, or by the total selected weight mass (floored at 1).
enum class PixelNorm { AllPixels, SelectedMass };

PixelNorm pixel_norm_from_name(const std::string& name);
const char* pixel_norm_name(PixelNorm norm);

/// sum_n M(n) * -log pred[target_n, n] / D over non-ignored pixels, with
/// probabilities clamped at 1e-12. D is the count of non-ignored pixels
/// (AllPixels) or max(sum of M, 1) (SelectedMass). Pixels labeled
/// ignore_index contribute to neither numerator nor denominator; an
/// all-ignored target gives 0.
double weighted_ce(const ProbabilityMap& pred, const LabelMap& target,
                   std::span<const double> weights,
                   PixelNorm norm = PixelNorm::AllPixels);

/// weighted_ce with unit weights and the AllPixels reduction.
double supervised_ce(const ProbabilityMap& pred, const LabelMap& target);

/// lambda1 * l_a + lambda2 * l_m; lambdas must be >= 0.
double combined_unsupervised(double l_a, double l_m, double lambda1 = 0.5,
                             double lambda2 = 0.5);

struct LossBreakdown {
    double l_sup = 0.0;     // supervised cross-entropy
    double l_u_a = 0.0;     // weighted unsupervised loss, clean input
    double l_u_m = 0.0;     // weighted unsupervised loss, perturbed input
    double l_u = 0.0;       // lambda1 * l_u_a + lambda2 * l_u_m
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    PixelNorm pixel_norm = PixelNorm::AllPixels;
};

}  // namespace csl
