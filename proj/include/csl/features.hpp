#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csl/tensor.hpp"

namespace csl {

/// Per-pixel class probability volume, class-major (K, H, W). Values are
/// held as float64 regardless of the file dtype; compute runs in double.
struct ProbabilityMap {
    size_t classes = 0;
    size_t height = 0;
    size_t width = 0;
    std::vector<double> probs;  // index (k * height + y) * width + x

    size_t n_pixels() const { return height * width; }

    double at(size_t k, size_t pixel) const {
        return probs[k * n_pixels() + pixel];
    }

    /// Rejects maps with K < 2, negative entries, or pixels whose class
    /// probabilities do not sum to 1 within 1e-5.
    void validate() const;

    /// Accepts a 3-D (K, H, W) float32/float64 tensor and validates it.
    static ProbabilityMap from_tensor(const Tensor& t);

    Tensor to_tensor(Dtype dtype = Dtype::Float64) const;
};

/// Per-pixel reliability metric choices. All of them are oriented
/// "larger = more reliable" once placed in a feature matrix.
enum class MetricKind { ResidualDispersion, Entropy, ResidualEntropy, Margin };

MetricKind metric_from_name(const std::string& name);
const char* metric_name(MetricKind kind);

/// 2xN matrix of per-pixel attributes: row 0 is maximum confidence, row 1 a
/// dispersion metric. Columns are pixels in row-major image order.
struct FeatureMatrix {
    size_t n_pixels = 0;
    size_t height = 0;
    size_t width = 0;
    std::vector<double> row0;            // max confidence per pixel
    std::vector<double> row1;            // dispersion metric per pixel
    std::vector<int32_t> argmax_labels;  // class attaining row0
    MetricKind metric = MetricKind::ResidualDispersion;
    bool normalized = false;
};

/// Per-pixel maximum probability and its class index. Ties go to the lowest
/// class index.
std::pair<Tensor, LabelMap> max_confidence(const ProbabilityMap& p);

/// Residual dispersion: v = -(1/(K-1)) * sum over non-max classes of
/// (p_k - mu)^2 with mu = (1 - p_max)/(K-1). Always <= 0; exactly 0 when the
/// non-max probabilities are equal (forced at K = 2, where the single
/// residual equals mu). The squared deviations are accumulated in sorted
/// order, so any permutation of the residual entries gives a bitwise
/// identical result.
Tensor residual_dispersion(const ProbabilityMap& p);

/// Raw alternative metrics: entropy = -sum p log p, residual_entropy = the
/// same sum excluding the max class, margin = p_max minus the runner-up.
/// Probabilities are clamped to >= 1e-12 before the log. Values keep their
/// natural orientation here; build_feature_matrix negates the entropies so
/// that larger always means more reliable.
Tensor alternative_metric(const ProbabilityMap& p, MetricKind kind);

/// Stacks [max confidence; chosen metric] into a 2xN matrix. Entropy kinds
/// are negated. With normalize, each row is z-scored with the standard
/// deviation floored at 1e-12 (a constant row becomes all zeros).
FeatureMatrix build_feature_matrix(const ProbabilityMap& p, MetricKind metric,
                                   bool normalize);

struct TaylorError {
    double exact_ce = 0.0;
    double approx_ce = 0.0;
    double abs_error = 0.0;
};

/// Cross-entropy of a prediction against the smoothed one-hot target
/// q_max = 1-(K-1)*eps, q_other = eps, compared with its second-order
/// expansion around the uniform residual distribution:
///
///   approx = -q_max*log p_max - eps*(K-1)*log mu - eps*(K-1)^3 * v / (2*(1-p_max)^2)
///
/// where mu = (1-p_max)/(K-1) and v is the residual dispersion. The constant
/// -eps*(K-1)*log mu term is assignment-independent but kept so exact and
/// approx agree exactly when all residuals equal mu. p_max = 1 makes the
/// coefficient singular and is rejected.
TaylorError taylor_approximation_error(std::span<const double> p_vector,
                                       double epsilon);

}  // namespace csl
