#include "csl/separation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace csl {

namespace {

constexpr double kRankTolerance = 1e-12;   // lambda2/lambda1 below = rank 1
constexpr double kVarianceFloor = 1e-12;

double mean_of(std::span<const double> values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

/// Within-class sum of squared distances, shared verbatim between the
/// public objective and the brute-force search so their values are bitwise
/// comparable for identical assignments.
double objective_of(const FeatureMatrix& phi,
                    std::span<const uint8_t> assignment) {
    double sx[2] = {0.0, 0.0};
    double sy[2] = {0.0, 0.0};
    size_t count[2] = {0, 0};
    for (size_t i = 0; i < phi.n_pixels; ++i) {
        const int c = assignment[i] ? 1 : 0;
        sx[c] += phi.row0[i];
        sy[c] += phi.row1[i];
        ++count[c];
    }
    double mx[2] = {0.0, 0.0};
    double my[2] = {0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
        if (count[c] == 0) continue;
        mx[c] = sx[c] / static_cast<double>(count[c]);
        my[c] = sy[c] / static_cast<double>(count[c]);
    }
    double sse = 0.0;
    for (size_t i = 0; i < phi.n_pixels; ++i) {
        const int c = assignment[i] ? 1 : 0;
        const double dx = phi.row0[i] - mx[c];
        const double dy = phi.row1[i] - my[c];
        sse += dx * dx + dy * dy;
    }
    return sse;
}

struct FeatureStats {
    std::array<double, 2> mu = {0.0, 0.0};
    std::array<double, 2> sigma = {0.0, 0.0};
};

/// Per-feature mean and population standard deviation over a pixel subset.
template <typename Pred>
FeatureStats stats_where(const FeatureMatrix& phi, Pred include) {
    FeatureStats st;
    size_t count = 0;
    for (size_t i = 0; i < phi.n_pixels; ++i) {
        if (!include(i)) continue;
        st.mu[0] += phi.row0[i];
        st.mu[1] += phi.row1[i];
        ++count;
    }
    if (count == 0) return st;
    st.mu[0] /= static_cast<double>(count);
    st.mu[1] /= static_cast<double>(count);
    double var[2] = {0.0, 0.0};
    for (size_t i = 0; i < phi.n_pixels; ++i) {
        if (!include(i)) continue;
        var[0] += (phi.row0[i] - st.mu[0]) * (phi.row0[i] - st.mu[0]);
        var[1] += (phi.row1[i] - st.mu[1]) * (phi.row1[i] - st.mu[1]);
    }
    st.sigma[0] = std::sqrt(var[0] / static_cast<double>(count));
    st.sigma[1] = std::sqrt(var[1] / static_cast<double>(count));
    return st;
}

double smooth_weight(double d0, double d1, const FeatureStats& st,
                     double alpha) {
    const double v0 = std::max(st.sigma[0] * st.sigma[0], kVarianceFloor);
    const double v1 = std::max(st.sigma[1] * st.sigma[1], kVarianceFloor);
    return std::exp(-d0 * d0 / (alpha * v0)) *
           std::exp(-d1 * d1 / (alpha * v1));
}

/// Feature matrix restricted to a pixel subset (shape degrades to Nx1 since
/// only the column count matters downstream).
FeatureMatrix submatrix(const FeatureMatrix& phi,
                        const std::vector<size_t>& indices) {
    FeatureMatrix sub;
    sub.n_pixels = indices.size();
    sub.height = indices.size();
    sub.width = 1;
    sub.metric = phi.metric;
    sub.normalized = phi.normalized;
    sub.row0.reserve(indices.size());
    sub.row1.reserve(indices.size());
    sub.argmax_labels.reserve(indices.size());
    for (size_t i : indices) {
        sub.row0.push_back(phi.row0[i]);
        sub.row1.push_back(phi.row1[i]);
        sub.argmax_labels.push_back(phi.argmax_labels[i]);
    }
    return sub;
}

}  // namespace

HardRule hard_rule_from_name(const std::string& name) {
    if (name == "and") return HardRule::And;
    if (name == "or") return HardRule::Or;
    throw std::invalid_argument("unknown hard rule '" + name +
                                "' (and or or)");
}

const char* hard_rule_name(HardRule rule) {
    return rule == HardRule::And ? "and" : "or";
}

void SeparationConfig::validate() const {
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("alpha must be > 0");
    }
}

SpectralResult spectral_partition(const FeatureMatrix& phi) {
    const size_t n = phi.n_pixels;
    if (n < 2) {
        throw std::invalid_argument("partition needs at least 2 pixels");
    }
    // 2x2 Gram matrix [[a, b], [b, c]] = Phi Phi^T. Its nonzero eigenvalues
    // equal those of the NxN Phi^T Phi, so the top-2 eigenvectors u_i of the
    // big matrix are recovered as Phi^T w_i / sigma_i without ever forming
    // an NxN object.
    double a = 0.0, b = 0.0, c = 0.0;
    for (size_t i = 0; i < n; ++i) {
        a += phi.row0[i] * phi.row0[i];
        b += phi.row0[i] * phi.row1[i];
        c += phi.row1[i] * phi.row1[i];
    }
    const double disc = std::sqrt((a - c) * (a - c) + 4.0 * b * b);
    const double lambda1 = 0.5 * (a + c + disc);
    const double lambda2 = std::max(0.5 * (a + c - disc), 0.0);

    SpectralResult result;
    result.assignment.resize(n);
    if (lambda1 <= 0.0 || lambda2 / lambda1 < kRankTolerance) {
        // Effectively rank 1: a second component does not exist, so split
        // on the confidence feature directly.
        const double m = mean_of(phi.row0);
        for (size_t i = 0; i < n; ++i) {
            result.assignment[i] = phi.row0[i] > m ? 1 : 0;
        }
        result.fallback_used = true;
        return result;
    }

    // Eigenvector for lambda1 from whichever row of (G - lambda1*I) is
    // better conditioned; the second eigenvector is its perpendicular.
    double w1x, w1y;
    const double n1 = std::hypot(b, lambda1 - a);
    const double n2 = std::hypot(lambda1 - c, b);
    if (n1 >= n2) {
        w1x = b;
        w1y = lambda1 - a;
    } else {
        w1x = lambda1 - c;
        w1y = b;
    }
    const double norm = std::max(n1, n2);
    if (norm == 0.0) {
        // G proportional to the identity; any orthonormal pair works.
        w1x = 1.0;
        w1y = 0.0;
    } else {
        w1x /= norm;
        w1y /= norm;
    }
    const double w2x = -w1y;
    const double w2y = w1x;

    const double s1 = std::sqrt(lambda1);
    const double s2 = std::sqrt(lambda2);
    for (size_t i = 0; i < n; ++i) {
        const double u1 = (phi.row0[i] * w1x + phi.row1[i] * w1y) / s1;
        const double u2 = (phi.row0[i] * w2x + phi.row1[i] * w2y) / s2;
        result.assignment[i] = std::abs(u2) > std::abs(u1) ? 1 : 0;
    }
    return result;
}

double partition_objective(const FeatureMatrix& phi,
                           const std::vector<uint8_t>& assignment) {
    if (assignment.size() != phi.n_pixels) {
        throw std::invalid_argument("assignment length mismatch");
    }
    return objective_of(phi, assignment);
}

BruteForceResult brute_force_partition(const FeatureMatrix& phi) {
    const size_t n = phi.n_pixels;
    if (n < 2) {
        throw std::invalid_argument("partition needs at least 2 pixels");
    }
    if (n > 20) {
        throw std::invalid_argument(
            "brute-force partition enumerates 2^N assignments; refusing N = " +
            std::to_string(n) + " > 20");
    }
    // Bit n-1-i of the mask is pixel i, so ascending mask order enumerates
    // assignment bitstrings in lexicographic order and the first optimum
    // found is the lexicographically smallest.
    std::vector<uint8_t> buffer(n);
    BruteForceResult best;
    best.objective = std::numeric_limits<double>::infinity();
    const uint32_t limit = (1u << n) - 1;
    for (uint32_t mask = 1; mask < limit; ++mask) {
        for (size_t i = 0; i < n; ++i) {
            buffer[i] = (mask >> (n - 1 - i)) & 1u;
        }
        const double obj = objective_of(phi, buffer);
        if (obj < best.objective) {
            best.objective = obj;
            best.assignment = buffer;
        }
    }
    return best;
}

int choose_reliable_class(const FeatureMatrix& phi,
                          const std::vector<uint8_t>& assignment) {
    double sum[2] = {0.0, 0.0};
    size_t count[2] = {0, 0};
    for (size_t i = 0; i < phi.n_pixels; ++i) {
        const int c = assignment[i] ? 1 : 0;
        sum[c] += phi.row0[i];
        ++count[c];
    }
    if (count[0] == 0) return 1;
    if (count[1] == 0) return 0;
    const double mean0 = sum[0] / static_cast<double>(count[0]);
    const double mean1 = sum[1] / static_cast<double>(count[1]);
    return mean1 > mean0 ? 1 : 0;
}

SelectionOutcome gaussian_weights(const FeatureMatrix& phi,
                                  const std::vector<uint8_t>& assignment,
                                  int reliable_class,
                                  const SeparationConfig& cfg) {
    cfg.validate();
    const size_t n = phi.n_pixels;
    if (assignment.size() != n) {
        throw std::invalid_argument("assignment length mismatch");
    }
    if (reliable_class < 0) {
        reliable_class = choose_reliable_class(phi, assignment);
    }

    SelectionOutcome out;
    out.height = phi.height;
    out.width = phi.width;
    out.assignment = assignment;
    out.reliable_class = reliable_class;
    out.weights.resize(n);
    out.hard_mask.resize(n);

    size_t reliable_count = 0;
    for (uint8_t a : assignment) {
        if ((a ? 1 : 0) == reliable_class) ++reliable_count;
    }

    if (reliable_count < cfg.min_class_pixels) {
        // Too few reliable pixels for meaningful statistics: trust the
        // confidence feature alone, smoothing everything else around the
        // global statistics.
        const FeatureStats global =
            stats_where(phi, [](size_t) { return true; });
        for (size_t i = 0; i < n; ++i) {
            const double d0 = phi.row0[i] - global.mu[0];
            const double d1 = phi.row1[i] - global.mu[1];
            const bool hard = d0 > 0.0;
            out.weights[i] = hard ? 1.0 : smooth_weight(d0, d1, global, cfg.alpha);
            out.hard_mask[i] = hard ? 1 : 0;
        }
        out.mu = global.mu;
        out.sigma = global.sigma;
        out.fallback_used = true;
        return out;
    }

    const FeatureStats st = stats_where(phi, [&](size_t i) {
        return (assignment[i] ? 1 : 0) == reliable_class;
    });
    for (size_t i = 0; i < n; ++i) {
        const double d0 = phi.row0[i] - st.mu[0];
        const double d1 = phi.row1[i] - st.mu[1];
        const bool hard = cfg.hard_rule == HardRule::And
                              ? (d0 > 0.0 && d1 > 0.0)
                              : (d0 > 0.0 || d1 > 0.0);
        out.weights[i] = hard ? 1.0 : smooth_weight(d0, d1, st, cfg.alpha);
        out.hard_mask[i] = hard ? 1 : 0;
    }
    out.mu = st.mu;
    out.sigma = st.sigma;
    return out;
}

SelectionOutcome select(const ProbabilityMap& p, const SeparationConfig& cfg) {
    cfg.validate();
    const FeatureMatrix phi = build_feature_matrix(p, cfg.metric, cfg.normalize);

    if (!cfg.class_specific) {
        const SpectralResult spectral = spectral_partition(phi);
        SelectionOutcome out = gaussian_weights(phi, spectral.assignment, -1, cfg);
        out.fallback_used = out.fallback_used || spectral.fallback_used;
        return out;
    }

    // Class-specific variant: each predicted class is partitioned on its own
    // feature columns and the weight maps are stitched back together.
    // Assignment is canonicalized to 1 = reliable; aggregate mu/sigma stay 0
    // since the statistics are per class.
    SelectionOutcome out;
    out.height = phi.height;
    out.width = phi.width;
    out.reliable_class = 1;
    out.assignment.assign(phi.n_pixels, 0);
    out.weights.assign(phi.n_pixels, 0.0);
    out.hard_mask.assign(phi.n_pixels, 0);

    std::vector<std::vector<size_t>> by_class(p.classes);
    for (size_t i = 0; i < phi.n_pixels; ++i) {
        by_class[static_cast<size_t>(phi.argmax_labels[i])].push_back(i);
    }
    const size_t min_pixels = std::max<size_t>(cfg.min_class_pixels, 2);
    for (const std::vector<size_t>& indices : by_class) {
        if (indices.empty()) continue;
        const FeatureMatrix sub = submatrix(phi, indices);
        if (indices.size() < min_pixels) {
            // Too few samples to separate: pixels above the class's mean
            // confidence are kept, the rest decay around the class stats.
            const FeatureStats st =
                stats_where(sub, [](size_t) { return true; });
            for (size_t j = 0; j < indices.size(); ++j) {
                const double d0 = sub.row0[j] - st.mu[0];
                const double d1 = sub.row1[j] - st.mu[1];
                const bool hard = d0 > 0.0;
                out.weights[indices[j]] =
                    hard ? 1.0 : smooth_weight(d0, d1, st, cfg.alpha);
                out.hard_mask[indices[j]] = hard ? 1 : 0;
                out.assignment[indices[j]] = hard ? 1 : 0;
            }
            out.fallback_used = true;
            continue;
        }
        const SpectralResult spectral = spectral_partition(sub);
        const SelectionOutcome sub_out =
            gaussian_weights(sub, spectral.assignment, -1, cfg);
        for (size_t j = 0; j < indices.size(); ++j) {
            out.weights[indices[j]] = sub_out.weights[j];
            out.hard_mask[indices[j]] = sub_out.hard_mask[j];
            out.assignment[indices[j]] =
                (sub_out.assignment[j] ? 1 : 0) == sub_out.reliable_class ? 1
                                                                          : 0;
        }
        out.fallback_used =
            out.fallback_used || spectral.fallback_used || sub_out.fallback_used;
    }
    return out;
}

SelectionOutcome threshold_baseline(const ProbabilityMap& p, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("tau must lie strictly inside (0, 1)");
    }
    p.validate();
    auto [pmax, labels] = max_confidence(p);
    auto pv = pmax.view<double>();

    SelectionOutcome out;
    out.height = p.height;
    out.width = p.width;
    out.reliable_class = 1;
    out.assignment.resize(p.n_pixels());
    out.weights.resize(p.n_pixels());
    out.hard_mask.resize(p.n_pixels());
    for (size_t i = 0; i < p.n_pixels(); ++i) {
        const bool keep = pv[i] > tau;
        out.assignment[i] = keep ? 1 : 0;
        out.weights[i] = keep ? 1.0 : 0.0;
        out.hard_mask[i] = keep ? 1 : 0;
    }
    return out;
}

}  // namespace csl
