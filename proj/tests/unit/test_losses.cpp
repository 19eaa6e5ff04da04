#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vsod/losses.hpp"
#include "vsod/ops.hpp"

using namespace vsod;
using namespace vsod::losses;
using vsod::testing::check_gradients;
using vsod::testing::random_mask;
using vsod::testing::random_tensor;

TEST(Losses, PerfectBinaryPredictionIsNearZero) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Tensor g = random_mask(16, 16, seed);
        Var p(g);
        EXPECT_LE(bce_loss(p, g).value().item(), 1e-6);
        EXPECT_LE(ssim_loss(p, g).value().item(), 1e-6);
        EXPECT_LE(iou_loss(p, g).value().item(), 1e-6);
    }
    const Tensor empty({1, 1, 16, 16}, 0.0);
    EXPECT_LE(iou_loss(Var(empty), empty).value().item(), 1e-6);
}

TEST(Losses, HalfPredictionBceIsLn2) {
    const Tensor g = random_mask(12, 12, 9);
    EXPECT_NEAR(bce_loss(Var(Tensor(g.shape(), 0.5)), g).value().item(), std::numbers::ln2, 1e-9);
}

TEST(Losses, BceClipsExtremes) {
    Tensor g({1, 1, 1, 2}, std::vector<double>{1.0, 0.0});
    Var p(Tensor({1, 1, 1, 2}, std::vector<double>{0.0, 1.0}), true);
    const Var l = bce_loss(p, g);
    EXPECT_TRUE(std::isfinite(l.value().item()));
    EXPECT_NEAR(l.value().item(), -std::log(kProbEpsilon), 1e-9);
    backward(l);
    EXPECT_TRUE(p.grad().all_finite());
}

TEST(Losses, SsimIsSymmetric) {
    const Tensor a = random_tensor({2, 1, 14, 13}, 1, 0.0, 1.0);
    const Tensor b = random_tensor({2, 1, 14, 13}, 2, 0.0, 1.0);
    EXPECT_NEAR(ssim_loss(Var(a), b).value().item(), ssim_loss(Var(b), a).value().item(), 1e-14);
}

TEST(Losses, SsimMatchesDirectWindowSum) {
    const Tensor p = random_tensor({1, 1, 12, 12}, 3, 0.0, 1.0);
    const Tensor g = random_mask(12, 12, 4);
    const auto w = gaussian_window(11, 1.5);
    double total = 0.0;
    int windows = 0;
    for (int oy = 0; oy + 11 <= 12; ++oy) {
        for (int ox = 0; ox + 11 <= 12; ++ox) {
            double mp = 0, mg = 0, pp = 0, gg = 0, pg = 0;
            for (int y = 0; y < 11; ++y) {
                for (int x = 0; x < 11; ++x) {
                    const double k = w[y] * w[x];
                    const double a = p.at(0, 0, oy + y, ox + x), b = g.at(0, 0, oy + y, ox + x);
                    mp += k * a;
                    mg += k * b;
                    pp += k * a * a;
                    gg += k * b * b;
                    pg += k * a * b;
                }
            }
            const double c1 = 1e-4, c2 = 9e-4;
            total += (2 * mp * mg + c1) * (2 * (pg - mp * mg) + c2) /
                     ((mp * mp + mg * mg + c1) * (pp - mp * mp + gg - mg * mg + c2));
            ++windows;
        }
    }
    EXPECT_NEAR(ssim_loss(Var(p), g).value().item(), 1.0 - total / windows, 1e-12);
}

TEST(Losses, SsimRejectsSmallMaps) { EXPECT_THROW(ssim_loss(Var(Tensor({1, 1, 10, 30})), Tensor({1, 1, 10, 30})), ShapeError); }

TEST(Losses, GaussianWindowSumsToOne) {
    const auto w = gaussian_window(11, 1.5);
    double s = 0.0;
    for (double v : w) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(w[0], w[10]);
}

TEST(Losses, IouVariants) {
    const Tensor g = random_mask(8, 8, 5);
    const Tensor p = random_tensor(g.shape(), 6, 0.0, 1.0);
    double i = 0, u = 0, tn = 0, fp = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        i += p[k] * g[k];
        u += p[k] + g[k] - p[k] * g[k];
        tn += (1 - p[k]) * (1 - g[k]);
        fp += p[k] * (1 - g[k]);
    }
    EXPECT_NEAR(iou_loss(Var(p), g).value().item(), 1.0 - (i + kIouEpsilon) / (u + kIouEpsilon), 1e-14);
    EXPECT_NEAR(iou_loss_with_true_negatives(p, g), 1.0 - i / (tn + i + fp + kIouEpsilon), 1e-14);
}

TEST(LossesGrad, Bce) {
    Var p(random_tensor({2, 1, 5, 5}, 7, 0.05, 0.95), true);
    const Tensor g = random_tensor({2, 1, 5, 5}, 8, 0.0, 1.0);
    auto r = check_gradients([&] { return bce_loss(p, g); }, {{"P", p}});
    EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(LossesGrad, Ssim) {
    Var p(random_tensor({2, 1, 13, 12}, 9, 0.0, 1.0), true);
    const Tensor g = random_mask(13, 12, 10);
    const std::array<Tensor, 2> gs{g, random_mask(13, 12, 11)};
    const Tensor gb = stack_batch(gs);
    auto r = check_gradients([&] { return ssim_loss(p, gb); }, {{"P", p}});
    EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(LossesGrad, Iou) {
    Var p(random_tensor({2, 1, 6, 6}, 12, 0.0, 1.0), true);
    const std::array<Tensor, 2> gs{random_mask(6, 6, 13), random_mask(6, 6, 14)};
    const Tensor g = stack_batch(gs);
    auto r = check_gradients([&] { return iou_loss(p, g); }, {{"P", p}});
    EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(LossesGrad, FinalLoss) {
    Var p(random_tensor({1, 1, 16, 16}, 15, 0.05, 0.95), true);
    const Tensor g = random_mask(16, 16, 16);
    auto r = check_gradients([&] { return final_loss(p, g); }, {{"P", p}});
    EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(Losses, FinalLossTogglesTerms) {
    const Tensor g = random_mask(16, 16, 17);
    Var p(random_tensor(g.shape(), 18, 0.05, 0.95));
    const double all = final_loss(p, g).value().item();
    const double parts = bce_loss(p, g).value().item() + ssim_loss(p, g).value().item() + iou_loss(p, g).value().item();
    EXPECT_NEAR(all, parts, 1e-12);
    EXPECT_NEAR(final_loss(p, g, {true, false, false}).value().item(), bce_loss(p, g).value().item(), 1e-15);
    EXPECT_THROW(final_loss(p, g, {false, false, false}), std::invalid_argument);
}

TEST(Losses, TotalLossCountsGateTerms) {
    const Tensor g = random_mask(32, 32, 19);
    Var p(random_tensor(g.shape(), 20, 0.05, 0.95));
    std::vector<AuxPrediction> aux;
    double expect_gates = 0.0;
    for (int level = 0; level < 5; ++level) {
        const int s = 16 >> level;
        for (Stream st : {Stream::Rgb, Stream::Flow}) {
            Var sal(random_tensor({1, 1, s, s}, 100 + level * 2 + (st == Stream::Flow), 0.05, 0.95));
            Var conf(Tensor({1, 1, 1, 1}, 0.4));
            aux.push_back({level, st, sal, conf});
            const Tensor gi = area_downsample(g, 32 / s);
            expect_gates += bce_loss(sal, gi).value().item() +
                            std::abs(0.4 - vsod::testing::brute_force_iou(sal.value(), gi)[0]);
        }
    }
    const TotalLoss t = total_loss(p, g, aux, true);
    EXPECT_EQ(t.gate_terms, 10);
    EXPECT_NEAR(t.gate_term, expect_gates, 1e-12);
    EXPECT_NEAR(t.total.value().item(), t.final_term + t.gate_term, 1e-12);

    const std::span<const AuxPrediction> nine(aux.data(), 9);
    EXPECT_THROW(total_loss(p, g, nine, true), std::invalid_argument);
    EXPECT_THROW(total_loss(p, g, aux, false), std::invalid_argument);
    const TotalLoss plain = total_loss(p, g, {}, false);
    EXPECT_EQ(plain.gate_terms, 0);
    EXPECT_DOUBLE_EQ(plain.total.value().item(), plain.final_term);
}
