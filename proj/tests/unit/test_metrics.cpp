#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vsod/metrics.hpp"

using namespace vsod;
using namespace vsod::metrics;
using vsod::testing::random_mask;
using vsod::testing::random_prediction;

namespace {

void make_frames(int count, std::uint64_t seed, std::vector<Tensor>& preds, std::vector<Tensor>& masks) {
    for (int i = 0; i < count; ++i) {
        masks.push_back(random_mask(32, 32, seed + i));
        preds.push_back(random_prediction(masks.back(), seed + 1000 + i));
    }
}

}  // namespace

TEST(Metrics, ThresholdGrid) {
    const auto t = threshold_grid();
    ASSERT_EQ(t.size(), 256u);
    EXPECT_EQ(t.front(), 0.0);
    EXPECT_EQ(t.back(), 1.0);
    EXPECT_EQ(t[51], 51.0 / 255.0);
}

TEST(Metrics, PerFramePrecisionRecallMatchOracle) {
    std::vector<Tensor> preds, masks;
    make_frames(30, 40, preds, masks);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto pr = precision_recall(preds[i], masks[i]);
        for (int k = 0; k < 256; ++k) {
            double p, r;
            vsod::testing::brute_force_frame_pr(preds[i], masks[i], k, p, r);
            ASSERT_EQ(pr.precision[k], p) << "frame " << i << " k " << k;
            ASSERT_EQ(pr.recall[k], r) << "frame " << i << " k " << k;
        }
    }
}

TEST(Metrics, DatasetMaxFMatchesOracle) {
    std::vector<Tensor> preds, masks;
    make_frames(100, 7, preds, masks);
    const auto oracle = vsod::testing::brute_force_f_measure(preds, masks);
    const MetricReport r = evaluate_dataset(preds, masks);
    EXPECT_EQ(r.max_f_beta, oracle.max_f);
    ASSERT_EQ(r.per_threshold_f.size(), 256u);
    for (int k = 0; k < 256; ++k) EXPECT_EQ(r.per_threshold_f[k], oracle.f[k]) << k;
    EXPECT_EQ(r.mae, vsod::testing::brute_force_mae(preds, masks));
    EXPECT_EQ(r.frame_count, 100);
}

TEST(Metrics, SingleFrameMaxF) {
    std::vector<Tensor> preds, masks;
    make_frames(1, 99, preds, masks);
    EXPECT_EQ(max_f_measure(preds[0], masks[0]).max_f, vsod::testing::brute_force_f_measure(preds, masks).max_f);
}

TEST(Metrics, ReportIsOrderInvariant) {
    std::vector<Tensor> preds, masks;
    make_frames(25, 300, preds, masks);
    const MetricReport a = evaluate_dataset(preds, masks);
    std::vector<int> idx(25);
    for (int i = 0; i < 25; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), std::mt19937_64(4));
    std::vector<Tensor> p2, m2;
    for (int i : idx) {
        p2.push_back(preds[i]);
        m2.push_back(masks[i]);
    }
    const MetricReport b = evaluate_dataset(p2, m2);
    EXPECT_EQ(a.max_f_beta, b.max_f_beta);
    EXPECT_EQ(a.s_measure, b.s_measure);
    EXPECT_EQ(a.mae, b.mae);
}

TEST(Metrics, GroundTruthAsPrediction) {
    std::vector<Tensor> masks;
    for (int i = 0; i < 5; ++i) masks.push_back(random_mask(24, 24, 500 + i * 3 + 2));
    // Skip frames with empty ground truth: recall is defined as 0 there.
    masks.erase(std::remove_if(masks.begin(), masks.end(), [](const Tensor& m) { return m.sum() == 0.0; }),
                masks.end());
    const MetricReport r = evaluate_dataset(masks, masks);
    EXPECT_DOUBLE_EQ(r.max_f_beta, 1.0);
    EXPECT_NEAR(r.s_measure, 1.0, 1e-9);  // the similarity terms carry an epsilon
    EXPECT_EQ(r.mae, 0.0);
}

TEST(Metrics, ConstantHalfPredictor) {
    const Tensor m = random_mask(20, 20, 3);
    EXPECT_DOUBLE_EQ(mae(Tensor(m.shape(), 0.5), m), 0.5);
}

TEST(Metrics, EmptyPredictionAndEmptyMask) {
    const Tensor zero({1, 1, 8, 8}, 0.0);
    const Tensor m = random_mask(8, 8, 6);
    // Nothing predicted: precision and F are 0 at every threshold.
    const auto pr = precision_recall(zero, m);
    for (double p : pr.precision) EXPECT_EQ(p, 0.0);
    EXPECT_EQ(max_f_measure(zero, m).max_f, 0.0);
    // Empty ground truth: recall is 0.
    const auto pr2 = precision_recall(Tensor({1, 1, 8, 8}, 0.7), zero);
    for (double r : pr2.recall) EXPECT_EQ(r, 0.0);
    // S-measure of an all-background frame is 1 - mean prediction.
    EXPECT_DOUBLE_EQ(s_measure(zero, zero), 1.0);
    EXPECT_DOUBLE_EQ(s_measure(Tensor({1, 1, 8, 8}, 0.25), zero), 0.75);
    const Tensor full({1, 1, 8, 8}, 1.0);
    EXPECT_DOUBLE_EQ(s_measure(Tensor({1, 1, 8, 8}, 0.25), full), 0.25);
}

TEST(Metrics, StrictThreshold) {
    // A pixel exactly at t is background at t.
    Tensor p({1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
    Tensor m({1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
    const auto pr = precision_recall(p, m);
    EXPECT_EQ(pr.recall[255], 0.0);
    EXPECT_EQ(pr.recall[254], 1.0);
    EXPECT_EQ(pr.precision[0], 1.0);
}

TEST(Metrics, SMeasureProperties) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Tensor m = random_mask(32, 32, seed);
        const Tensor p = random_prediction(m, seed + 77);
        const double s = s_measure(p, m);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0 + 1e-12);
        if (m.sum() > 0.0 && m.sum() < m.size()) {
            EXPECT_NEAR(s_measure(m, m), 1.0, 1e-9) << seed;
            Tensor inv = m;
            for (double& v : inv.values()) v = 1.0 - v;
            EXPECT_LT(s_measure(inv, m), s) << seed;
        }
    }
}

TEST(Metrics, SMeasureHandComputed) {
    // 2x2 frame, one foreground pixel at the top-left, prediction 0.5 everywhere.
    Tensor m({1, 1, 2, 2}, std::vector<double>{1, 0, 0, 0});
    Tensor p({1, 1, 2, 2}, 0.5);
    // Object term: fg {0.5}: 2*.5/(.25+1+0) = 0.8; bg {0.5,0.5,0.5} sd 0: 0.8; So = 0.8.
    // Region term: centroid (1,1); quadrants are single pixels with zero variance, SSIM
    // falls to 1 when both means and variances vanish and 0 otherwise. Weights 1/4 each;
    // each block has alpha = 0, beta = (mx^2+my^2)*0 = 0 -> 1. Sr = 1.
    const double so = 2 * 0.5 / (0.25 + 1.0 + std::numeric_limits<double>::epsilon());
    EXPECT_NEAR(s_measure(p, m), 0.5 * so + 0.5 * 1.0, 1e-12);
}

TEST(Metrics, Validation) {
    EXPECT_THROW(precision_recall(Tensor({1, 1, 4, 4}), Tensor({1, 1, 4, 4}, 0.5)), std::invalid_argument);
    EXPECT_THROW(precision_recall(Tensor({1, 1, 4, 4}), Tensor({1, 1, 4, 5})), ShapeError);
    std::vector<Tensor> p(2, Tensor({1, 1, 4, 4})), m(1, Tensor({1, 1, 4, 4}));
    EXPECT_THROW(evaluate_dataset(p, m), std::invalid_argument);
}

TEST(Metrics, JsonRoundTrip) {
    std::vector<Tensor> preds, masks;
    make_frames(4, 11, preds, masks);
    const MetricReport r = evaluate_dataset(preds, masks);
    const MetricReport back = report_from_json(to_json(r));
    EXPECT_EQ(back.max_f_beta, r.max_f_beta);
    EXPECT_EQ(back.s_measure, r.s_measure);
    EXPECT_EQ(back.mae, r.mae);
    EXPECT_EQ(back.per_threshold_f, r.per_threshold_f);
    EXPECT_EQ(back.frame_count, 4);
}

TEST(Metrics, CanonicalSumIgnoresOrder) {
    std::vector<double> v{1e16, 1.0, -1e16, 3.0, 1e-3};
    std::vector<double> w{3.0, -1e16, 1e-3, 1.0, 1e16};
    EXPECT_EQ(canonical_sum(v), canonical_sum(w));
}
