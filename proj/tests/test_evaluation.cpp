#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "csl/evaluation.hpp"
#include "csl/rng.hpp"
#include "csl/tensor.hpp"

using namespace csl;
using nlohmann::json;

namespace {

LabelMap labels_of(size_t h, size_t w, const std::vector<int32_t>& labels) {
    LabelMap m;
    m.height = h;
    m.width = w;
    m.labels = labels;
    return m;
}

SelectionOutcome selection_of(size_t h, size_t w,
                              std::vector<double> weights) {
    SelectionOutcome sel;
    sel.height = h;
    sel.width = w;
    sel.weights = std::move(weights);
    sel.hard_mask.resize(sel.weights.size());
    sel.assignment.resize(sel.weights.size());
    for (size_t i = 0; i < sel.weights.size(); ++i) {
        sel.hard_mask[i] = sel.weights[i] == 1.0 ? 1 : 0;
        sel.assignment[i] = sel.hard_mask[i];
    }
    return sel;
}

}  // namespace

TEST_CASE("hand-counted selection report") {
    // Four pixels: two hard-selected (one right, one wrong), two dropped.
    const LabelMap gt = labels_of(1, 4, {0, 1, 0, 1});
    const LabelMap pred = labels_of(1, 4, {0, 0, 1, 0});
    const QualityReport r =
        score(selection_of(1, 4, {1.0, 1.0, 0.0, 0.0}), pred, gt);
    CHECK(r.n_pixels == 4);
    CHECK(r.n_ignored == 0);
    CHECK(r.hard_sampling_rate == doctest::Approx(0.5));
    CHECK(r.soft_sampling_rate == doctest::Approx(0.5));
    CHECK(r.accuracy_hard == doctest::Approx(0.5));
    CHECK(r.accuracy_soft == doctest::Approx(0.5));
    // Class 0: one of two pixels selected and right. Class 1: none right.
    CHECK(r.recall.at(0) == doctest::Approx(0.5));
    CHECK(r.recall.at(1) == doctest::Approx(0.0));
    CHECK(r.mean_recall == doctest::Approx(0.25));
}

TEST_CASE("perfect selection scores one everywhere") {
    const LabelMap gt = labels_of(2, 2, {0, 1, 2, 1});
    const QualityReport r =
        score(selection_of(2, 2, {1.0, 1.0, 1.0, 1.0}), gt, gt);
    CHECK(r.accuracy_hard == doctest::Approx(1.0));
    CHECK(r.accuracy_soft == doctest::Approx(1.0));
    CHECK(r.hard_sampling_rate == doctest::Approx(1.0));
    CHECK(r.mean_recall == doctest::Approx(1.0));
    for (const auto& [cls, rec] : r.recall) {
        CHECK(rec == doctest::Approx(1.0));
    }
}

TEST_CASE("soft weights blend accuracy by mass") {
    const LabelMap gt = labels_of(1, 2, {0, 0});
    const LabelMap pred = labels_of(1, 2, {0, 1});
    // Right pixel carries weight 0.75, wrong pixel 0.25.
    const QualityReport r = score(selection_of(1, 2, {0.75, 0.25}), pred, gt);
    CHECK(r.accuracy_soft == doctest::Approx(0.75));
    CHECK(std::isnan(r.accuracy_hard));  // nothing hits weight one exactly
    CHECK(r.hard_sampling_rate == doctest::Approx(0.0));
}

TEST_CASE("empty selections surface as missing values, not zeros") {
    const LabelMap gt = labels_of(1, 3, {0, 1, 0});
    const LabelMap pred = labels_of(1, 3, {0, 1, 1});
    const QualityReport r =
        score(selection_of(1, 3, {0.0, 0.0, 0.0}), pred, gt);
    CHECK(std::isnan(r.accuracy_hard));
    CHECK(std::isnan(r.accuracy_soft));
    CHECK(r.hard_sampling_rate == doctest::Approx(0.0));

    const json j = json::parse(to_json(r));
    CHECK(j["accuracy_hard"].is_null());
    CHECK(j["accuracy_soft"].is_null());
    CHECK(j["hard_sampling_rate"].get<double>() == doctest::Approx(0.0));
}

TEST_CASE("fully ignored images yield an all-null report") {
    LabelMap gt = labels_of(1, 2, {255, 255});
    const LabelMap pred = labels_of(1, 2, {0, 1});
    const QualityReport r = score(selection_of(1, 2, {1.0, 1.0}), pred, gt);
    CHECK(r.n_ignored == 2);
    CHECK(r.n_pixels == 0);
    CHECK(std::isnan(r.accuracy_hard));
    CHECK(std::isnan(r.soft_sampling_rate));
    CHECK(r.recall.empty());
    const json j = json::parse(to_json(r));
    CHECK(j["mean_recall"].is_null());
    CHECK(j["soft_sampling_rate"].is_null());
}

TEST_CASE("report is invariant under pixel permutation") {
    SplitMix64 rng(41);
    const size_t n = 64;
    std::vector<int32_t> gt_v(n), pred_v(n);
    std::vector<double> w(n);
    for (size_t i = 0; i < n; ++i) {
        gt_v[i] = int32_t(rng.next_below(4));
        pred_v[i] = int32_t(rng.next_below(4));
        w[i] = rng.next_double() < 0.3 ? 1.0 : rng.next_double();
    }
    const QualityReport base = score(selection_of(8, 8, w),
                                     labels_of(8, 8, pred_v),
                                     labels_of(8, 8, gt_v));

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    SplitMix64 shuffle_rng(99);
    for (size_t i = n - 1; i > 0; --i) {
        std::swap(order[i], order[shuffle_rng.next_below(i + 1)]);
    }
    std::vector<int32_t> gt_p(n), pred_p(n);
    std::vector<double> w_p(n);
    for (size_t i = 0; i < n; ++i) {
        gt_p[i] = gt_v[order[i]];
        pred_p[i] = pred_v[order[i]];
        w_p[i] = w[order[i]];
    }
    const QualityReport shuffled = score(selection_of(8, 8, w_p),
                                         labels_of(8, 8, pred_p),
                                         labels_of(8, 8, gt_p));
    CHECK(shuffled.accuracy_hard == doctest::Approx(base.accuracy_hard));
    CHECK(shuffled.accuracy_soft == doctest::Approx(base.accuracy_soft));
    CHECK(shuffled.soft_sampling_rate ==
          doctest::Approx(base.soft_sampling_rate));
    CHECK(shuffled.mean_recall == doctest::Approx(base.mean_recall));
}

TEST_CASE("all-or-nothing weights collapse soft onto hard accuracy") {
    SplitMix64 rng(47);
    const size_t n = 100;
    std::vector<int32_t> gt_v(n), pred_v(n);
    std::vector<double> w(n);
    for (size_t i = 0; i < n; ++i) {
        gt_v[i] = int32_t(rng.next_below(3));
        pred_v[i] = int32_t(rng.next_below(3));
        w[i] = rng.next_double() < 0.5 ? 1.0 : 0.0;
    }
    const QualityReport r = score(selection_of(10, 10, w),
                                  labels_of(10, 10, pred_v),
                                  labels_of(10, 10, gt_v));
    if (!std::isnan(r.accuracy_hard)) {
        CHECK(r.accuracy_soft == doctest::Approx(r.accuracy_hard));
        CHECK(r.soft_sampling_rate == doctest::Approx(r.hard_sampling_rate));
    }
}

TEST_CASE("recall only covers classes present in the ground truth") {
    const LabelMap gt = labels_of(1, 4, {0, 0, 2, 2});
    const LabelMap pred = labels_of(1, 4, {0, 1, 2, 1});
    const QualityReport r =
        score(selection_of(1, 4, {1.0, 1.0, 1.0, 1.0}), pred, gt);
    CHECK(r.recall.count(0) == 1);
    CHECK(r.recall.count(1) == 0);  // never appears in gt
    CHECK(r.recall.count(2) == 1);
    for (const auto& [cls, rec] : r.recall) {
        CHECK(rec >= 0.0);
        CHECK(rec <= 1.0);
    }
}

TEST_CASE("comparison table sorts methods and fills pairwise deltas") {
    const LabelMap gt = labels_of(1, 4, {0, 1, 0, 1});
    const LabelMap pred = labels_of(1, 4, {0, 0, 1, 1});
    // threshold keeps pixels 0 and 1 (one right), csl keeps 0 and 3 (both
    // right).
    const ComparisonTable table = compare(
        {
            {"threshold", selection_of(1, 4, {1.0, 1.0, 0.0, 0.0})},
            {"csl", selection_of(1, 4, {1.0, 0.0, 0.0, 1.0})},
        },
        pred, gt);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].first == "csl");
    CHECK(table.rows[1].first == "threshold");
    REQUIRE(table.deltas.size() == 1);
    CHECK(table.deltas[0].method_a == "csl");
    CHECK(table.deltas[0].method_b == "threshold");
    CHECK(table.deltas[0].d_accuracy_hard == doctest::Approx(0.5));
    CHECK(table.deltas[0].d_hard_sampling == doctest::Approx(0.0));

    const json j = json::parse(to_json(table));
    REQUIRE(j["methods"].is_array());
    CHECK(j["methods"][0]["name"] == "csl");
    CHECK(j["methods"][1]["name"] == "threshold");
    CHECK(j["deltas"][0]["accuracy_hard"].get<double>() ==
          doctest::Approx(0.5));

    const std::string text = to_text(table);
    CHECK(text.find("method") != std::string::npos);
    CHECK(text.find("csl") != std::string::npos);
    CHECK(text.find("threshold") != std::string::npos);

    const ComparisonTable solo =
        compare({{"only", selection_of(1, 4, {1, 1, 1, 1})}}, pred, gt);
    CHECK(solo.deltas.empty());
    CHECK_THROWS_AS(compare({}, pred, gt), std::invalid_argument);
}

TEST_CASE("missing-value cells render as n/a in the text table") {
    const LabelMap gt = labels_of(1, 2, {0, 1});
    const LabelMap pred = labels_of(1, 2, {0, 1});
    // No pixel has weight exactly one, so hard accuracy is undefined.
    const ComparisonTable table =
        compare({{"soft", selection_of(1, 2, {0.5, 0.5})}}, pred, gt);
    const std::string text = to_text(table);
    CHECK(text.find("n/a") != std::string::npos);
}

TEST_CASE("shape validation") {
    const LabelMap gt = labels_of(1, 4, {0, 1, 0, 1});
    const LabelMap tall = labels_of(2, 2, {0, 1, 0, 1});
    const SelectionOutcome sel = selection_of(1, 4, {1, 1, 1, 1});
    CHECK_THROWS_AS(score(sel, tall, gt), std::invalid_argument);
    CHECK_THROWS_AS(score(selection_of(1, 4, {1, 1}), gt, gt),
                    std::invalid_argument);
}
