#include "csl/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csl {

namespace {

constexpr double kSumTolerance = 1e-5;
constexpr double kLogClamp = 1e-12;
constexpr double kStdFloor = 1e-12;

size_t argmax_lowest(std::span<const double> values) {
    size_t best = 0;
    for (size_t k = 1; k < values.size(); ++k) {
        if (values[k] > values[best]) best = k;
    }
    return best;
}

/// -(1/(K-1)) * sum of squared deviations of the non-max entries from their
/// common mean. Deviations are accumulated smallest-first so the result is
/// bitwise independent of the order of the residual entries.
double dispersion_of(std::span<const double> p, size_t k_max) {
    const size_t k_count = p.size();
    if (k_count == 2) return 0.0;  // single residual, deviation forced to 0
    const double mu = (1.0 - p[k_max]) / static_cast<double>(k_count - 1);
    std::vector<double> sq;
    sq.reserve(k_count - 1);
    for (size_t k = 0; k < k_count; ++k) {
        if (k == k_max) continue;
        const double delta = p[k] - mu;
        sq.push_back(delta * delta);
    }
    std::sort(sq.begin(), sq.end());
    double sum = 0.0;
    for (double s : sq) sum += s;
    return -sum / static_cast<double>(k_count - 1);
}

}  // namespace

void ProbabilityMap::validate() const {
    if (classes < 2) {
        throw std::invalid_argument("probability map needs at least 2 classes");
    }
    if (probs.size() != classes * n_pixels()) {
        throw std::invalid_argument("probability map value count mismatch");
    }
    const size_t n = n_pixels();
    for (size_t pix = 0; pix < n; ++pix) {
        double sum = 0.0;
        for (size_t k = 0; k < classes; ++k) {
            const double v = probs[k * n + pix];
            if (!(v >= 0.0)) {
                throw std::invalid_argument(
                    "probability map holds a negative or non-finite value at "
                    "pixel " + std::to_string(pix));
            }
            sum += v;
        }
        if (sum < 1.0 - kSumTolerance || sum > 1.0 + kSumTolerance) {
            throw std::invalid_argument(
                "pixel " + std::to_string(pix) + " probabilities sum to " +
                std::to_string(sum) + ", expected 1 within 1e-5");
        }
    }
}

ProbabilityMap ProbabilityMap::from_tensor(const Tensor& t) {
    if (t.ndim() != 3) {
        throw std::invalid_argument("probability map tensor must be 3-D "
                                    "(classes, height, width)");
    }
    if (t.dtype() != Dtype::Float32 && t.dtype() != Dtype::Float64) {
        throw std::invalid_argument("probability map tensor must be float");
    }
    ProbabilityMap p;
    p.classes = t.shape()[0];
    p.height = t.shape()[1];
    p.width = t.shape()[2];
    p.probs = t.as_f64();
    p.validate();
    return p;
}

Tensor ProbabilityMap::to_tensor(Dtype dtype) const {
    return Tensor::from_f64({classes, height, width}, dtype, probs);
}

MetricKind metric_from_name(const std::string& name) {
    if (name == "residual-dispersion") return MetricKind::ResidualDispersion;
    if (name == "entropy") return MetricKind::Entropy;
    if (name == "residual-entropy") return MetricKind::ResidualEntropy;
    if (name == "margin") return MetricKind::Margin;
    throw std::invalid_argument("unknown metric '" + name +
                                "' (residual-dispersion, entropy, "
                                "residual-entropy or margin)");
}

const char* metric_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::ResidualDispersion: return "residual-dispersion";
        case MetricKind::Entropy: return "entropy";
        case MetricKind::ResidualEntropy: return "residual-entropy";
        case MetricKind::Margin: return "margin";
    }
    throw std::invalid_argument("unknown metric kind");
}

std::pair<Tensor, LabelMap> max_confidence(const ProbabilityMap& p) {
    p.validate();
    const size_t n = p.n_pixels();
    Tensor pmax = Tensor::zeros({p.height, p.width}, Dtype::Float64);
    auto out = pmax.view<double>();
    LabelMap labels;
    labels.height = p.height;
    labels.width = p.width;
    labels.labels.resize(n);
    for (size_t pix = 0; pix < n; ++pix) {
        size_t best = 0;
        for (size_t k = 1; k < p.classes; ++k) {
            if (p.probs[k * n + pix] > p.probs[best * n + pix]) best = k;
        }
        out[pix] = p.probs[best * n + pix];
        labels.labels[pix] = static_cast<int32_t>(best);
    }
    return {std::move(pmax), std::move(labels)};
}

Tensor residual_dispersion(const ProbabilityMap& p) {
    p.validate();
    const size_t n = p.n_pixels();
    Tensor out = Tensor::zeros({p.height, p.width}, Dtype::Float64);
    auto v = out.view<double>();
    std::vector<double> pixel(p.classes);
    for (size_t pix = 0; pix < n; ++pix) {
        for (size_t k = 0; k < p.classes; ++k) pixel[k] = p.probs[k * n + pix];
        v[pix] = dispersion_of(pixel, argmax_lowest(pixel));
    }
    return out;
}

Tensor alternative_metric(const ProbabilityMap& p, MetricKind kind) {
    p.validate();
    if (kind == MetricKind::ResidualDispersion) {
        throw std::invalid_argument(
            "alternative_metric handles entropy, residual-entropy and margin; "
            "use residual_dispersion for the default metric");
    }
    const size_t n = p.n_pixels();
    Tensor out = Tensor::zeros({p.height, p.width}, Dtype::Float64);
    auto values = out.view<double>();
    std::vector<double> pixel(p.classes);
    for (size_t pix = 0; pix < n; ++pix) {
        for (size_t k = 0; k < p.classes; ++k) pixel[k] = p.probs[k * n + pix];
        const size_t k_max = argmax_lowest(pixel);
        double v = 0.0;
        switch (kind) {
            case MetricKind::Entropy:
            case MetricKind::ResidualEntropy:
                for (size_t k = 0; k < p.classes; ++k) {
                    if (kind == MetricKind::ResidualEntropy && k == k_max)
                        continue;
                    const double q = std::max(pixel[k], kLogClamp);
                    v -= q * std::log(q);
                }
                break;
            case MetricKind::Margin: {
                double second = -1.0;
                for (size_t k = 0; k < p.classes; ++k) {
                    if (k != k_max) second = std::max(second, pixel[k]);
                }
                v = pixel[k_max] - second;
                break;
            }
            case MetricKind::ResidualDispersion:
                break;  // rejected above
        }
        values[pix] = v;
    }
    return out;
}

FeatureMatrix build_feature_matrix(const ProbabilityMap& p, MetricKind metric,
                                   bool normalize) {
    p.validate();
    FeatureMatrix phi;
    phi.n_pixels = p.n_pixels();
    phi.height = p.height;
    phi.width = p.width;
    phi.metric = metric;
    phi.normalized = normalize;

    auto [pmax, labels] = max_confidence(p);
    auto pmax_view = pmax.view<double>();
    phi.row0.assign(pmax_view.begin(), pmax_view.end());
    phi.argmax_labels = std::move(labels.labels);

    Tensor metric_values = metric == MetricKind::ResidualDispersion
                               ? residual_dispersion(p)
                               : alternative_metric(p, metric);
    auto mv = metric_values.view<double>();
    phi.row1.assign(mv.begin(), mv.end());
    if (metric == MetricKind::Entropy || metric == MetricKind::ResidualEntropy) {
        for (double& v : phi.row1) v = -v;  // larger = more reliable
    }

    if (normalize) {
        for (std::vector<double>* row : {&phi.row0, &phi.row1}) {
            double mean = 0.0;
            for (double v : *row) mean += v;
            mean /= static_cast<double>(row->size());
            double var = 0.0;
            for (double v : *row) var += (v - mean) * (v - mean);
            const double std_dev =
                std::sqrt(var / static_cast<double>(row->size()));
            if (std_dev < kStdFloor) {
                // Constant row: the floored denominator would only amplify
                // rounding residue, so the z-scored row is exactly zero.
                std::fill(row->begin(), row->end(), 0.0);
            } else {
                for (double& v : *row) v = (v - mean) / std_dev;
            }
        }
    }
    return phi;
}

TaylorError taylor_approximation_error(std::span<const double> p_vector,
                                       double epsilon) {
    const size_t k_count = p_vector.size();
    if (k_count < 2) {
        throw std::invalid_argument("probability vector needs >= 2 entries");
    }
    double sum = 0.0;
    for (double v : p_vector) {
        if (!(v >= 0.0)) {
            throw std::invalid_argument(
                "probability vector holds a negative or non-finite entry");
        }
        sum += v;
    }
    if (sum < 1.0 - kSumTolerance || sum > 1.0 + kSumTolerance) {
        throw std::invalid_argument("probability vector does not sum to 1");
    }
    if (epsilon < 0.0 ||
        epsilon * static_cast<double>(k_count - 1) > 1.0) {
        throw std::invalid_argument(
            "epsilon must lie in [0, 1/(K-1)] for a valid smoothed target");
    }

    const size_t k_max = argmax_lowest(p_vector);
    const double p_max = p_vector[k_max];
    if (p_max >= 1.0) {
        throw std::invalid_argument(
            "maximum probability is 1; the expansion coefficient "
            "1/(1-p_max)^2 is singular");
    }

    const double k_res = static_cast<double>(k_count - 1);
    const double q_max = 1.0 - k_res * epsilon;
    const double mu = (1.0 - p_max) / k_res;

    double exact = -q_max * std::log(std::max(p_max, kLogClamp));
    for (size_t k = 0; k < k_count; ++k) {
        if (k == k_max) continue;
        exact -= epsilon * std::log(std::max(p_vector[k], kLogClamp));
    }

    const double v = dispersion_of(p_vector, k_max);
    const double approx =
        -q_max * std::log(std::max(p_max, kLogClamp)) -
        epsilon * k_res * std::log(mu) -
        epsilon * k_res * k_res * k_res * v /
            (2.0 * (1.0 - p_max) * (1.0 - p_max));

    return {exact, approx, std::abs(exact - approx)};
}

}  // namespace csl
