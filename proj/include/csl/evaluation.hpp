#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csl/separation.hpp"
#include "csl/tensor.hpp"

namespace csl {

/// Selection quality against ground truth. Pixels whose ground-truth label
/// is the ignore value are excluded from every count. Rates over an empty
/// denominator are NaN (serialized as null), never 0.
struct QualityReport {
    double soft_sampling_rate = 0.0;  // mean weight over valid pixels
    double hard_sampling_rate = 0.0;  // fraction with weight exactly 1
    double accuracy_hard = 0.0;       // P(pred == gt | weight == 1)
    double accuracy_soft = 0.0;       // sum w*correct / sum w
    std::map<int32_t, double> recall; // per class present in gt
    double mean_recall = 0.0;         // mean over present classes
    size_t n_pixels = 0;              // valid (non-ignored) pixels
    size_t n_ignored = 0;
};

QualityReport score(const SelectionOutcome& sel, const LabelMap& pred_labels,
                    const LabelMap& gt);

struct ComparisonDelta {
    std::string method_a;
    std::string method_b;
    double d_accuracy_hard = 0.0;   // a minus b
    double d_hard_sampling = 0.0;
    double d_soft_sampling = 0.0;
};

struct ComparisonTable {
    std::vector<std::pair<std::string, QualityReport>> rows;  // sorted by name
    std::vector<ComparisonDelta> deltas;  // all unordered pairs, a < b by name
};

ComparisonTable compare(
    const std::vector<std::pair<std::string, SelectionOutcome>>& methods,
    const LabelMap& pred_labels, const LabelMap& gt);

/// JSON renderings; NaN fields become null.
std::string to_json(const QualityReport& report);
std::string to_json(const ComparisonTable& table);

/// Fixed-width column rendering for terminals.
std::string to_text(const ComparisonTable& table);

}  // namespace csl
