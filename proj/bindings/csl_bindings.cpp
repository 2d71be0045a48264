// Python bindings for the selection pipeline. Arrays cross the boundary as
// numpy buffers: probability maps are (K, H, W) float, label maps (H, W)
// int32, weights (H, W) float64. Results come back as plain dicts so callers
// do not need wrapper types.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "csl/evaluation.hpp"
#include "csl/features.hpp"
#include "csl/losses.hpp"
#include "csl/perturbation.hpp"
#include "csl/separation.hpp"
#include "csl/synthgen.hpp"
#include "csl/tensor.hpp"
#include "csl/version.hpp"

namespace py = pybind11;
using namespace csl;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Int32Array = py::array_t<int32_t, py::array::c_style | py::array::forcecast>;
using Uint8Array = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

ProbabilityMap probs_of(const DoubleArray& arr) {
    if (arr.ndim() != 3) {
        throw std::invalid_argument("probability map must be a (K, H, W) array");
    }
    ProbabilityMap p;
    p.classes = static_cast<size_t>(arr.shape(0));
    p.height = static_cast<size_t>(arr.shape(1));
    p.width = static_cast<size_t>(arr.shape(2));
    p.probs.assign(arr.data(), arr.data() + arr.size());
    p.validate();
    return p;
}

LabelMap labels_of(const Int32Array& arr, int32_t ignore_index) {
    if (arr.ndim() != 2) {
        throw std::invalid_argument("label map must be a (H, W) array");
    }
    LabelMap m;
    m.height = static_cast<size_t>(arr.shape(0));
    m.width = static_cast<size_t>(arr.shape(1));
    m.ignore_index = ignore_index;
    m.labels.assign(arr.data(), arr.data() + arr.size());
    return m;
}

std::vector<double> weights_of(const DoubleArray& arr, size_t h, size_t w) {
    if (arr.ndim() != 2 || static_cast<size_t>(arr.shape(0)) != h ||
        static_cast<size_t>(arr.shape(1)) != w) {
        throw std::invalid_argument("weights must be a (H, W) array matching the map");
    }
    return {arr.data(), arr.data() + arr.size()};
}

template <typename T>
py::array_t<T> image_like(const std::vector<T>& values, size_t h, size_t w) {
    py::array_t<T> out({h, w});
    std::memcpy(out.mutable_data(), values.data(), values.size() * sizeof(T));
    return out;
}

py::dict outcome_dict(const SelectionOutcome& sel) {
    py::dict d;
    d["weights"] = image_like(sel.weights, sel.height, sel.width);
    d["hard_mask"] = image_like(sel.hard_mask, sel.height, sel.width);
    d["assignment"] = image_like(sel.assignment, sel.height, sel.width);
    d["reliable_class"] = sel.reliable_class;
    d["mu"] = py::make_tuple(sel.mu[0], sel.mu[1]);
    d["sigma"] = py::make_tuple(sel.sigma[0], sel.sigma[1]);
    d["fallback_used"] = sel.fallback_used;
    return d;
}

SelectionOutcome outcome_of_weights(const DoubleArray& weights) {
    if (weights.ndim() != 2) {
        throw std::invalid_argument("weights must be a (H, W) array");
    }
    SelectionOutcome sel;
    sel.height = static_cast<size_t>(weights.shape(0));
    sel.width = static_cast<size_t>(weights.shape(1));
    sel.weights.assign(weights.data(), weights.data() + weights.size());
    sel.hard_mask.resize(sel.weights.size());
    for (size_t i = 0; i < sel.weights.size(); ++i) {
        sel.hard_mask[i] = sel.weights[i] == 1.0 ? 1 : 0;
    }
    sel.assignment = sel.hard_mask;
    return sel;
}

py::dict report_dict(const QualityReport& r) {
    py::dict d;
    d["soft_sampling_rate"] = r.soft_sampling_rate;
    d["hard_sampling_rate"] = r.hard_sampling_rate;
    d["accuracy_hard"] = r.accuracy_hard;
    d["accuracy_soft"] = r.accuracy_soft;
    d["recall"] = r.recall;
    d["mean_recall"] = r.mean_recall;
    d["n_pixels"] = r.n_pixels;
    d["n_ignored"] = r.n_ignored;
    return d;
}

py::dict select_py(const DoubleArray& probs, double alpha,
                   const std::string& metric, const std::string& hard_rule,
                   bool normalize, bool class_specific,
                   size_t min_class_pixels) {
    SeparationConfig cfg;
    cfg.alpha = alpha;
    cfg.metric = metric_from_name(metric);
    cfg.hard_rule = hard_rule_from_name(hard_rule);
    cfg.normalize = normalize;
    cfg.class_specific = class_specific;
    cfg.min_class_pixels = min_class_pixels;
    cfg.validate();
    return outcome_dict(select(probs_of(probs), cfg));
}

py::dict threshold_baseline_py(const DoubleArray& probs, double tau) {
    return outcome_dict(threshold_baseline(probs_of(probs), tau));
}

py::array_t<double> residual_dispersion_py(const DoubleArray& probs) {
    const ProbabilityMap p = probs_of(probs);
    const Tensor v = residual_dispersion(p);
    const auto values = v.view<double>();
    py::array_t<double> out({p.height, p.width});
    std::memcpy(out.mutable_data(), values.data(), values.size() * sizeof(double));
    return out;
}

py::tuple max_confidence_py(const DoubleArray& probs) {
    const ProbabilityMap p = probs_of(probs);
    const auto [pmax, labels] = max_confidence(p);
    const auto values = pmax.view<double>();
    py::array_t<double> conf({p.height, p.width});
    std::memcpy(conf.mutable_data(), values.data(), values.size() * sizeof(double));
    return py::make_tuple(conf, image_like(labels.labels, p.height, p.width));
}

py::array_t<uint8_t> make_mask_py(const DoubleArray& weights, size_t patch_size,
                                  double theta, uint64_t seed) {
    const SelectionOutcome sel = outcome_of_weights(weights);
    const PerturbationMask mask = make_mask(sel, patch_size, theta, seed);
    return image_like(mask.zero_out, sel.height, sel.width);
}

py::array_t<double> apply_mask_py(const DoubleArray& image,
                                  const Uint8Array& zero_out) {
    if (image.ndim() != 3) {
        throw std::invalid_argument("image must be a (C, H, W) array");
    }
    Tensor t = Tensor::from_f64(
        {static_cast<size_t>(image.shape(0)), static_cast<size_t>(image.shape(1)),
         static_cast<size_t>(image.shape(2))},
        Dtype::Float64,
        std::span<const double>(image.data(), static_cast<size_t>(image.size())));

    PerturbationMask mask;
    mask.height = static_cast<size_t>(image.shape(1));
    mask.width = static_cast<size_t>(image.shape(2));
    if (zero_out.ndim() != 2 ||
        static_cast<size_t>(zero_out.shape(0)) != mask.height ||
        static_cast<size_t>(zero_out.shape(1)) != mask.width) {
        throw std::invalid_argument("zero mask must be a (H, W) array matching the image");
    }
    mask.zero_out.assign(zero_out.data(), zero_out.data() + zero_out.size());
    const Tensor masked = apply_mask(t, mask);

    py::array_t<double> out({static_cast<size_t>(image.shape(0)), mask.height,
                             mask.width});
    std::memcpy(out.mutable_data(), masked.bytes().data(), masked.bytes().size());
    return out;
}

double weighted_ce_py(const DoubleArray& probs, const Int32Array& target,
                      const DoubleArray& weights, const std::string& pixel_norm,
                      int32_t ignore_index) {
    const ProbabilityMap p = probs_of(probs);
    const LabelMap t = labels_of(target, ignore_index);
    return weighted_ce(p, t, weights_of(weights, p.height, p.width),
                       pixel_norm_from_name(pixel_norm));
}

py::dict generate_py(size_t height, size_t width, size_t classes,
                     double error_rate, double temperature,
                     double confusion_mass, size_t region_seeds,
                     uint64_t seed) {
    SynthConfig cfg;
    cfg.height = height;
    cfg.width = width;
    cfg.classes = classes;
    cfg.error_rate = error_rate;
    cfg.temperature = temperature;
    cfg.confusion_mass = confusion_mass;
    cfg.region_seeds = region_seeds;
    cfg.seed = seed;
    const SynthResult r = generate(cfg);

    py::array_t<double> probs({cfg.classes, cfg.height, cfg.width});
    std::memcpy(probs.mutable_data(), r.probs.probs.data(),
                r.probs.probs.size() * sizeof(double));
    py::dict d;
    d["probs"] = probs;
    d["gt"] = image_like(r.gt.labels, cfg.height, cfg.width);
    d["correctness"] = image_like(r.correctness, cfg.height, cfg.width);
    d["planted_wrong"] = image_like(r.planted_wrong, cfg.height, cfg.width);
    return d;
}

py::dict score_py(const DoubleArray& weights, const Int32Array& pred_labels,
                  const Int32Array& gt, int32_t ignore_index) {
    const SelectionOutcome sel = outcome_of_weights(weights);
    return report_dict(score(sel, labels_of(pred_labels, ignore_index),
                             labels_of(gt, ignore_index)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Confidence-separable pseudo-label selection";
    m.attr("__version__") = kVersion;

    m.def("select", &select_py, py::arg("probs"), py::arg("alpha") = 8.0,
          py::arg("metric") = "residual-dispersion",
          py::arg("hard_rule") = "and", py::arg("normalize") = false,
          py::arg("class_specific") = false, py::arg("min_class_pixels") = 8,
          "Partition pixels into reliable/unreliable and compute loss weights");
    m.def("threshold_baseline", &threshold_baseline_py, py::arg("probs"),
          py::arg("tau"),
          "Weight 1 where the max probability strictly exceeds tau, else 0");
    m.def("residual_dispersion", &residual_dispersion_py, py::arg("probs"),
          "Negative variance of the non-max probabilities per pixel");
    m.def("max_confidence", &max_confidence_py, py::arg("probs"),
          "Per-pixel (max probability, argmax label) pair");
    m.def("make_mask", &make_mask_py, py::arg("weights"), py::arg("patch_size"),
          py::arg("theta"), py::arg("seed"),
          "Patchwise Bernoulli(theta) zero-out mask restricted to weight-1 pixels");
    m.def("apply_mask", &apply_mask_py, py::arg("image"), py::arg("zero_out"),
          "Zero the masked pixels across all channels of a (C, H, W) image");
    m.def("weighted_ce", &weighted_ce_py, py::arg("probs"), py::arg("target"),
          py::arg("weights"), py::arg("pixel_norm") = "all-pixels",
          py::arg("ignore_index") = 255,
          "Weighted cross-entropy of probabilities against target labels");
    m.def("generate", &generate_py, py::arg("height"), py::arg("width"),
          py::arg("classes"), py::arg("error_rate") = 0.2,
          py::arg("temperature") = 0.25, py::arg("confusion_mass") = 0.6,
          py::arg("region_seeds") = 40, py::arg("seed") = 0,
          "Deterministic synthetic miscalibrated predictions with ground truth");
    m.def("score", &score_py, py::arg("weights"), py::arg("pred_labels"),
          py::arg("gt"), py::arg("ignore_index") = 255,
          "Selection quality report: sampling rates, accuracies, recalls");
}
