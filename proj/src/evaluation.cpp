#include "csl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

namespace csl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json num_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

nlohmann::json report_json(const QualityReport& r) {
    nlohmann::json recall = nlohmann::json::object();
    for (const auto& [cls, value] : r.recall) {
        recall[std::to_string(cls)] = num_or_null(value);
    }
    return {
        {"soft_sampling_rate", num_or_null(r.soft_sampling_rate)},
        {"hard_sampling_rate", num_or_null(r.hard_sampling_rate)},
        {"accuracy_hard", num_or_null(r.accuracy_hard)},
        {"accuracy_soft", num_or_null(r.accuracy_soft)},
        {"recall", recall},
        {"mean_recall", num_or_null(r.mean_recall)},
        {"n_pixels", r.n_pixels},
        {"n_ignored", r.n_ignored},
    };
}

std::string format_cell(double v) {
    if (std::isnan(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

QualityReport score(const SelectionOutcome& sel, const LabelMap& pred_labels,
                    const LabelMap& gt) {
    if (sel.height != gt.height || sel.width != gt.width ||
        pred_labels.height != gt.height || pred_labels.width != gt.width) {
        throw std::invalid_argument("selection, prediction and ground truth "
                                    "dims differ");
    }
    if (sel.weights.size() != gt.size()) {
        throw std::invalid_argument("selection weight map size mismatch");
    }

    QualityReport r;
    double soft_mass = 0.0;
    double soft_correct = 0.0;
    size_t hard_count = 0;
    size_t hard_correct = 0;
    std::map<int32_t, size_t> gt_count;
    std::map<int32_t, size_t> recall_hits;
    for (size_t i = 0; i < gt.size(); ++i) {
        const int32_t truth = gt.labels[i];
        if (truth == gt.ignore_index) {
            ++r.n_ignored;
            continue;
        }
        ++r.n_pixels;
        const double w = sel.weights[i];
        const bool hard = w == 1.0;
        const bool correct = pred_labels.labels[i] == truth;
        soft_mass += w;
        if (correct) soft_correct += w;
        if (hard) {
            ++hard_count;
            if (correct) ++hard_correct;
        }
        ++gt_count[truth];
        if (hard && correct) ++recall_hits[truth];
    }

    if (r.n_pixels == 0) {
        r.soft_sampling_rate = kNaN;
        r.hard_sampling_rate = kNaN;
        r.accuracy_hard = kNaN;
        r.accuracy_soft = kNaN;
        r.mean_recall = kNaN;
        return r;
    }
    const auto valid = static_cast<double>(r.n_pixels);
    r.soft_sampling_rate = soft_mass / valid;
    r.hard_sampling_rate = static_cast<double>(hard_count) / valid;
    r.accuracy_hard = hard_count > 0
                          ? static_cast<double>(hard_correct) /
                                static_cast<double>(hard_count)
                          : kNaN;
    r.accuracy_soft = soft_mass > 0.0 ? soft_correct / soft_mass : kNaN;

    double recall_sum = 0.0;
    for (const auto& [cls, count] : gt_count) {
        const auto hits = recall_hits.count(cls) ? recall_hits.at(cls) : 0;
        const double recall =
            static_cast<double>(hits) / static_cast<double>(count);
        r.recall[cls] = recall;
        recall_sum += recall;
    }
    r.mean_recall = recall_sum / static_cast<double>(gt_count.size());
    return r;
}

ComparisonTable compare(
    const std::vector<std::pair<std::string, SelectionOutcome>>& methods,
    const LabelMap& pred_labels, const LabelMap& gt) {
    if (methods.empty()) {
        throw std::invalid_argument("compare needs at least one method");
    }
    ComparisonTable table;
    for (const auto& [name, sel] : methods) {
        table.rows.emplace_back(name, score(sel, pred_labels, gt));
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 0; i < table.rows.size(); ++i) {
        for (size_t j = i + 1; j < table.rows.size(); ++j) {
            ComparisonDelta d;
            d.method_a = table.rows[i].first;
            d.method_b = table.rows[j].first;
            d.d_accuracy_hard = table.rows[i].second.accuracy_hard -
                                table.rows[j].second.accuracy_hard;
            d.d_hard_sampling = table.rows[i].second.hard_sampling_rate -
                                table.rows[j].second.hard_sampling_rate;
            d.d_soft_sampling = table.rows[i].second.soft_sampling_rate -
                                table.rows[j].second.soft_sampling_rate;
            table.deltas.push_back(std::move(d));
        }
    }
    return table;
}

std::string to_json(const QualityReport& report) {
    return report_json(report).dump(2);
}

std::string to_json(const ComparisonTable& table) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& [name, report] : table.rows) {
        methods.push_back({{"name", name}, {"report", report_json(report)}});
    }
    nlohmann::json deltas = nlohmann::json::array();
    for (const ComparisonDelta& d : table.deltas) {
        deltas.push_back({
            {"a", d.method_a},
            {"b", d.method_b},
            {"accuracy_hard", num_or_null(d.d_accuracy_hard)},
            {"hard_sampling_rate", num_or_null(d.d_hard_sampling)},
            {"soft_sampling_rate", num_or_null(d.d_soft_sampling)},
        });
    }
    return nlohmann::json{{"methods", methods}, {"deltas", deltas}}.dump(2);
}

std::string to_text(const ComparisonTable& table) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-24s %12s %12s %12s %12s %12s\n",
                  "method", "soft_rate", "hard_rate", "acc_hard", "acc_soft",
                  "mean_recall");
    out += line;
    for (const auto& [name, r] : table.rows) {
        std::snprintf(line, sizeof(line), "%-24s %12s %12s %12s %12s %12s\n",
                      name.c_str(), format_cell(r.soft_sampling_rate).c_str(),
                      format_cell(r.hard_sampling_rate).c_str(),
                      format_cell(r.accuracy_hard).c_str(),
                      format_cell(r.accuracy_soft).c_str(),
                      format_cell(r.mean_recall).c_str());
        out += line;
    }
    return out;
}

}  // namespace csl
