#include "csl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csl {

namespace {
constexpr double kLogClamp = 1e-12;
}

PixelNorm pixel_norm_from_name(const std::string& name) {
    if (name == "all-pixels") return PixelNorm::AllPixels;
    if (name == "selected-mass") return PixelNorm::SelectedMass;
    throw std::invalid_argument("unknown pixel norm '" + name +
                                "' (all-pixels or selected-mass)");
}

const char* pixel_norm_name(PixelNorm norm) {
    return norm == PixelNorm::AllPixels ? "all-pixels" : "selected-mass";
}

double weighted_ce(const ProbabilityMap& pred, const LabelMap& target,
                   std::span<const double> weights, PixelNorm norm) {
    pred.validate();
    if (target.height != pred.height || target.width != pred.width) {
        throw std::invalid_argument("prediction and target dims differ");
    }
    if (weights.size() != pred.n_pixels()) {
        throw std::invalid_argument("weight map size mismatch");
    }
    target.validate_labels(pred.classes);

    const size_t n = pred.n_pixels();
    double numerator = 0.0;
    double weight_mass = 0.0;
    size_t valid = 0;
    for (size_t i = 0; i < n; ++i) {
        const int32_t label = target.labels[i];
        if (label == target.ignore_index) continue;
        ++valid;
        weight_mass += weights[i];
        const double prob =
            std::max(pred.at(static_cast<size_t>(label), i), kLogClamp);
        numerator += weights[i] * -std::log(prob);
    }
    if (valid == 0) return 0.0;
    const double denom = norm == PixelNorm::AllPixels
                             ? static_cast<double>(valid)
                             : std::max(weight_mass, 1.0);
    return numerator / denom;
}

double supervised_ce(const ProbabilityMap& pred, const LabelMap& target) {
    const std::vector<double> ones(pred.n_pixels(), 1.0);
    return weighted_ce(pred, target, ones, PixelNorm::AllPixels);
}

double combined_unsupervised(double l_a, double l_m, double lambda1,
                             double lambda2) {
    if (lambda1 < 0.0 || lambda2 < 0.0) {
        throw std::invalid_argument("loss weights must be >= 0");
    }
    return lambda1 * l_a + lambda2 * l_m;
}

}  // namespace csl
