#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "csl/features.hpp"

namespace csl {

/// Rule deciding which pixels get a hard weight of 1: strictly above the
/// reliable-class mean on both features (And) or on at least one (Or).
enum class HardRule { And, Or };

HardRule hard_rule_from_name(const std::string& name);
const char* hard_rule_name(HardRule rule);

struct SeparationConfig {
    double alpha = 8.0;  // Gaussian smoothing parameter
    HardRule hard_rule = HardRule::And;
    MetricKind metric = MetricKind::ResidualDispersion;
    bool normalize = false;
    bool class_specific = false;
    size_t min_class_pixels = 8;

    void validate() const;  // alpha > 0
};

/// Result of the full selection: binary partition, reliable-side statistics,
/// and the per-pixel loss weights in [0, 1].
struct SelectionOutcome {
    size_t height = 0;
    size_t width = 0;
    std::vector<uint8_t> assignment;  // per-pixel partition label in {0, 1}
    int reliable_class = 0;           // which assignment value is reliable
    std::array<double, 2> mu = {0.0, 0.0};     // per-feature reliable mean
    std::array<double, 2> sigma = {0.0, 0.0};  // per-feature reliable std
    std::vector<double> weights;               // per-pixel weight in [0, 1]
    std::vector<uint8_t> hard_mask;            // weight forced to 1 by rule
    bool fallback_used = false;

    size_t n_pixels() const { return height * width; }
};

struct SpectralResult {
    std::vector<uint8_t> assignment;
    bool fallback_used = false;
};

/// Binary partition from the top-2 eigenvectors u_1, u_2 of the NxN matrix
/// Phi^T Phi: pixel n goes to the component whose |u_i(n)| is larger (ties
/// to 0). Computed without materializing NxN: the 2x2 Gram matrix
/// G = Phi Phi^T shares its nonzero eigenvalues, its eigenpairs have a
/// closed form, and u_i = Phi^T w_i / sigma_i. When the spectrum is
/// effectively rank 1 (lambda2/lambda1 < 1e-12) the split degrades to
/// "row-0 value above its mean" with fallback_used set.
SpectralResult spectral_partition(const FeatureMatrix& phi);

struct BruteForceResult {
    std::vector<uint8_t> assignment;
    double objective = 0.0;  // within-class sum of squared distances
};

/// Within-class sum of squared distances to the class means for a given
/// binary assignment of the feature columns.
double partition_objective(const FeatureMatrix& phi,
                           const std::vector<uint8_t>& assignment);

/// Exact minimizer of the within-class objective over all 2^N - 2
/// non-trivial binary assignments; ties broken by the lexicographically
/// smallest assignment bitstring. Refuses N > 20.
BruteForceResult brute_force_partition(const FeatureMatrix& phi);

/// The partition side with the larger mean of feature row 0.
int choose_reliable_class(const FeatureMatrix& phi,
                          const std::vector<uint8_t>& assignment);

/// Gaussian smooth weights around the reliable-side statistics:
/// w_n = prod_c exp(-(h_n(c) - mu_c)^2 / (alpha * sigma_c^2)), sigma_c^2
/// floored at 1e-12, overridden to exactly 1 where the hard rule fires.
/// reliable_class < 0 means "choose the side with larger row-0 mean". If the
/// reliable side has fewer than cfg.min_class_pixels pixels the weights fall
/// back to 1 where row 0 exceeds its global mean and to the Gaussian around
/// global statistics elsewhere, with fallback_used set.
SelectionOutcome gaussian_weights(const FeatureMatrix& phi,
                                  const std::vector<uint8_t>& assignment,
                                  int reliable_class,
                                  const SeparationConfig& cfg);

/// Full pipeline: features -> spectral partition -> Gaussian weights. With
/// cfg.class_specific, each predicted class with at least min_class_pixels
/// pixels is partitioned independently and the weight maps are reassembled;
/// undersized classes get weight 1 above their own mean confidence and the
/// class-statistics Gaussian below it. In that mode assignment is
/// canonicalized to 1 = reliable and the aggregate mu/sigma are left at 0.
SelectionOutcome select(const ProbabilityMap& p, const SeparationConfig& cfg);

/// Confidence thresholding: weight 1 where p_max strictly exceeds tau, else
/// 0; the hard mask equals the weights.
SelectionOutcome threshold_baseline(const ProbabilityMap& p, double tau);

}  // namespace csl
