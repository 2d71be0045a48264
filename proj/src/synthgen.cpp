#include "csl/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "csl/rng.hpp"

namespace csl {

void SynthConfig::validate() const {
    if (height < 1 || width < 1) {
        throw std::invalid_argument("image dims must be >= 1");
    }
    if (classes < 2) {
        throw std::invalid_argument("need at least 2 classes");
    }
    if (!(error_rate >= 0.0 && error_rate <= 1.0)) {
        throw std::invalid_argument("error rate must lie in [0, 1]");
    }
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("temperature must be > 0");
    }
    if (!(confusion_mass >= 0.0 && confusion_mass <= 1.0)) {
        throw std::invalid_argument("confusion mass must lie in [0, 1]");
    }
    if (region_seeds < 1) {
        throw std::invalid_argument("need at least 1 region seed");
    }
}

SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();
    const size_t n = cfg.height * cfg.width;
    const size_t k_count = cfg.classes;
    SplitMix64 rng(cfg.seed);

    // Voronoi sites; site j carries class j mod K so every class appears
    // when region_seeds >= K.
    std::vector<size_t> site_y(cfg.region_seeds), site_x(cfg.region_seeds);
    for (size_t j = 0; j < cfg.region_seeds; ++j) {
        site_y[j] = rng.next_below(cfg.height);
        site_x[j] = rng.next_below(cfg.width);
    }

    SynthResult result;
    result.gt.height = cfg.height;
    result.gt.width = cfg.width;
    result.gt.labels.resize(n);
    for (size_t y = 0; y < cfg.height; ++y) {
        for (size_t x = 0; x < cfg.width; ++x) {
            size_t best = 0;
            size_t best_d2 = static_cast<size_t>(-1);
            for (size_t j = 0; j < cfg.region_seeds; ++j) {
                const size_t dy = y > site_y[j] ? y - site_y[j] : site_y[j] - y;
                const size_t dx = x > site_x[j] ? x - site_x[j] : site_x[j] - x;
                const size_t d2 = dy * dy + dx * dx;
                if (d2 < best_d2) {  // strict: ties keep the lowest site
                    best_d2 = d2;
                    best = j;
                }
            }
            result.gt.labels[y * cfg.width + x] =
                static_cast<int32_t>(best % k_count);
        }
    }

    // Per-pixel draws happen in a fixed order and count regardless of the
    // branch taken, so one pixel's outcome never shifts another's stream.
    result.probs.classes = k_count;
    result.probs.height = cfg.height;
    result.probs.width = cfg.width;
    result.probs.probs.resize(k_count * n);
    result.correctness.resize(n);
    result.planted_wrong.resize(n);

    std::vector<double> logits(k_count);
    std::vector<double> p(k_count);
    for (size_t pix = 0; pix < n; ++pix) {
        const auto gt_class = static_cast<size_t>(result.gt.labels[pix]);
        const bool wrong = rng.next_double() < cfg.error_rate;
        const uint64_t wrong_draw = rng.next_below(k_count - 1);
        const double g = 2.0 + 2.0 * rng.next_double();
        for (size_t k = 0; k < k_count; ++k) {
            logits[k] = 0.1 * rng.next_normal();
        }

        const size_t pred =
            wrong ? (wrong_draw >= gt_class ? wrong_draw + 1 : wrong_draw)
                  : gt_class;
        logits[pred] += g;

        double z_max = logits[0] / cfg.temperature;
        for (size_t k = 1; k < k_count; ++k) {
            z_max = std::max(z_max, logits[k] / cfg.temperature);
        }
        double sum = 0.0;
        for (size_t k = 0; k < k_count; ++k) {
            p[k] = std::exp(logits[k] / cfg.temperature - z_max);
            sum += p[k];
        }
        for (size_t k = 0; k < k_count; ++k) p[k] /= sum;

        if (wrong) {
            // Concentrate part of the residual mass on the true class. The
            // residual distribution turns bimodal, which is what makes the
            // dispersion feature able to flag these pixels.
            const double residual = 1.0 - p[pred];
            if (k_count == 2) {
                p[gt_class] = residual;  // no third class to share with
            } else {
                const double others = residual - p[gt_class];
                const double keep = (1.0 - cfg.confusion_mass) * residual;
                if (others > 0.0) {
                    const double scale = keep / others;
                    for (size_t k = 0; k < k_count; ++k) {
                        if (k != pred && k != gt_class) p[k] *= scale;
                    }
                } else {
                    const double share =
                        keep / static_cast<double>(k_count - 2);
                    for (size_t k = 0; k < k_count; ++k) {
                        if (k != pred && k != gt_class) p[k] = share;
                    }
                }
                p[gt_class] = cfg.confusion_mass * residual;
            }
        }

        size_t arg = 0;
        for (size_t k = 1; k < k_count; ++k) {
            if (p[k] > p[arg]) arg = k;
        }
        result.correctness[pix] = arg == gt_class ? 1 : 0;
        result.planted_wrong[pix] = wrong ? 1 : 0;
        for (size_t k = 0; k < k_count; ++k) {
            result.probs.probs[k * n + pix] = p[k];
        }
    }

    result.probs.validate();
    return result;
}

}  // namespace csl
