#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "gradcheck.hpp"
#include "vsod/ops.hpp"
#include "vsod/params.hpp"

using namespace vsod;
using vsod::testing::check_gradients;
using vsod::testing::random_projection;
using vsod::testing::random_tensor;

TEST(Tensor, IndexingAndSample) {
    Tensor t({2, 3, 4, 5});
    t.at(1, 2, 3, 4) = 7.0;
    EXPECT_EQ(t.size(), 120u);
    EXPECT_EQ(t[119], 7.0);
    const Tensor s = t.sample(1);
    EXPECT_EQ(s.shape(), (Shape{1, 3, 4, 5}));
    EXPECT_EQ(s.at(0, 2, 3, 4), 7.0);
}

TEST(Tensor, RejectsMismatchedData) {
    EXPECT_THROW(Tensor({1, 1, 2, 2}, std::vector<double>(3)), ShapeError);
    Tensor t({1, 1, 2, 2});
    EXPECT_THROW(t.reshape({1, 1, 3, 1}), ShapeError);
    EXPECT_THROW((void)t.item(), ShapeError);
}

TEST(Tensor, StackBatch) {
    const std::array<Tensor, 2> parts{Tensor({1, 2, 3, 3}, 1.0), Tensor({1, 2, 3, 3}, 2.0)};
    const Tensor b = stack_batch(parts);
    EXPECT_EQ(b.shape(), (Shape{2, 2, 3, 3}));
    EXPECT_EQ(b.at(0, 1, 2, 2), 1.0);
    EXPECT_EQ(b.at(1, 0, 0, 0), 2.0);
    const std::array<Tensor, 2> bad{Tensor({1, 2, 3, 3}), Tensor({1, 1, 3, 3})};
    EXPECT_THROW(stack_batch(bad), ShapeError);
}

TEST(Autograd, SharedSubexpressionAccumulates) {
    Var x(Tensor({1, 1, 1, 2}, std::vector<double>{2.0, -3.0}), true);
    Var y = ops::mul(x, x);  // x^2, d/dx = 2x
    Var z = ops::add(y, x);  // x^2 + x
    backward(ops::mean_all(z));
    EXPECT_DOUBLE_EQ(x.grad()[0], (2 * 2.0 + 1) / 2.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], (2 * -3.0 + 1) / 2.0);
}

TEST(Autograd, NoGradGuardRecordsNothing) {
    Var x(Tensor({1, 1, 1, 1}, 1.0), true);
    NoGradGuard guard;
    Var y = ops::scale(x, 3.0);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.node()->inputs.empty());
}

TEST(Ops, ConvMatchesDirectLoop) {
    const Tensor x = random_tensor({2, 3, 7, 6}, 1);
    const Tensor w = random_tensor({4, 3, 3, 3}, 2);
    const Tensor b = random_tensor({1, 4, 1, 1}, 3);
    const ops::ConvSpec spec{2, 2, 2};
    const Tensor out = ops::conv2d(Var(x), Var(w), Var(b), spec).value();
    const int oh = ops::conv_out_extent(7, 3, spec), ow = ops::conv_out_extent(6, 3, spec);
    ASSERT_EQ(out.shape(), (Shape{2, 4, oh, ow}));
    for (int n = 0; n < 2; ++n) {
        for (int o = 0; o < 4; ++o) {
            for (int y = 0; y < oh; ++y) {
                for (int xx = 0; xx < ow; ++xx) {
                    double acc = b[o];
                    for (int c = 0; c < 3; ++c) {
                        for (int ky = 0; ky < 3; ++ky) {
                            for (int kx = 0; kx < 3; ++kx) {
                                const int iy = y * 2 - 2 + ky * 2, ix = xx * 2 - 2 + kx * 2;
                                if (iy < 0 || iy >= 7 || ix < 0 || ix >= 6) continue;
                                acc += w.at(o, c, ky, kx) * x.at(n, c, iy, ix);
                            }
                        }
                    }
                    EXPECT_NEAR(out.at(n, o, y, xx), acc, 1e-12);
                }
            }
        }
    }
}

TEST(Ops, ConvShapeErrors) {
    Var x(Tensor({1, 3, 8, 8}));
    Var w(Tensor({4, 2, 3, 3}));
    EXPECT_THROW(ops::conv2d(x, w, Var(), {1, 1, 1}), ShapeError);
}

TEST(OpsGrad, Conv2dStridedDilated) {
    for (ops::ConvSpec spec : {ops::ConvSpec{1, 1, 1}, ops::ConvSpec{2, 1, 1}, ops::ConvSpec{1, 2, 2}, ops::ConvSpec{1, 0, 1}}) {
        Var x(random_tensor({2, 3, 6, 5}, 11), true);
        Var w(random_tensor({4, 3, 3, 3}, 12), true);
        Var b(random_tensor({1, 4, 1, 1}, 13), true);
        auto r = check_gradients([&] { return random_projection(ops::conv2d(x, w, b, spec), 99); },
                                 {{"x", x}, {"w", w}, {"b", b}});
        EXPECT_LT(r.max_rel_error, 1e-7) << r.worst_leaf << " stride " << spec.stride;
    }
}

TEST(OpsGrad, PointwiseConv) {
    Var x(random_tensor({2, 5, 4, 4}, 1), true);
    Var w(random_tensor({3, 5, 1, 1}, 2), true);
    auto r = check_gradients([&] { return random_projection(ops::conv2d(x, w, Var(), {}), 5); }, {{"x", x}, {"w", w}});
    EXPECT_LT(r.max_rel_error, 1e-7) << r.worst_leaf;
}

TEST(OpsGrad, GroupNorm) {
    Var x(random_tensor({2, 6, 3, 4}, 21), true);
    Var g(random_tensor({1, 6, 1, 1}, 22, 0.5, 1.5), true);
    Var b(random_tensor({1, 6, 1, 1}, 23), true);
    auto r = check_gradients([&] { return random_projection(ops::group_norm(x, g, b, 3), 4); },
                             {{"x", x}, {"gamma", g}, {"beta", b}});
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst_leaf;
}

TEST(Ops, GroupNormNormalizes) {
    Var x(random_tensor({1, 4, 5, 5}, 3, -4.0, 9.0));
    Var g(Tensor({1, 4, 1, 1}, 1.0));
    Var b(Tensor({1, 4, 1, 1}, 0.0));
    const Tensor y = ops::group_norm(x, g, b, 2).value();
    for (int grp = 0; grp < 2; ++grp) {
        double mean = 0.0, sq = 0.0;
        for (int c = grp * 2; c < grp * 2 + 2; ++c) {
            for (int i = 0; i < 25; ++i) {
                mean += y.plane(0, c)[i];
                sq += y.plane(0, c)[i] * y.plane(0, c)[i];
            }
        }
        EXPECT_NEAR(mean / 50.0, 0.0, 1e-12);
        EXPECT_NEAR(sq / 50.0, 1.0, 1e-3);
    }
}

TEST(OpsGrad, ElementwiseAndPooling) {
    Var a(random_tensor({2, 3, 4, 4}, 31), true);
    Var b(random_tensor({2, 3, 4, 4}, 32), true);
    Var s(random_tensor({2, 1, 1, 1}, 33), true);
    auto r = check_gradients(
        [&] {
            Var m = ops::mul(ops::sigmoid(a), ops::sub(b, a));
            Var p = ops::broadcast_spatial(ops::global_avg_pool(m), 4, 4);
            std::array<Var, 2> parts{ops::scale_per_sample(m, s), p};
            return random_projection(ops::concat_channels(parts), 8);
        },
        {{"a", a}, {"b", b}, {"s", s}});
    EXPECT_LT(r.max_rel_error, 1e-7) << r.worst_leaf;
}

TEST(OpsGrad, ReluAwayFromKink) {
    Tensor t = random_tensor({1, 2, 3, 3}, 41);
    for (double& v : t.values()) v += v >= 0 ? 0.1 : -0.1;
    Var x(t, true);
    auto r = check_gradients([&] { return random_projection(ops::relu(x), 2); }, {{"x", x}});
    EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(OpsGrad, UpsampleBilinear) {
    Var x(random_tensor({1, 2, 3, 5}, 51), true);
    for (auto [h, w] : {std::pair{6, 10}, std::pair{7, 4}, std::pair{3, 5}}) {
        auto r = check_gradients([&] { return random_projection(ops::upsample_bilinear(x, h, w), 3); }, {{"x", x}});
        EXPECT_LT(r.max_rel_error, 1e-7) << h << "x" << w;
    }
}

TEST(Ops, UpsampleOfConstantIsConstant) {
    const Tensor up = resize_bilinear(Tensor({1, 1, 4, 4}, 0.25), 9, 13);
    for (double v : up.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Ops, AreaDownsample) {
    Tensor m({1, 1, 4, 4});
    m.at(0, 0, 0, 0) = 1.0;
    m.at(0, 0, 1, 1) = 1.0;
    const Tensor d = area_downsample(m, 2);
    EXPECT_EQ(d.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_DOUBLE_EQ(d.at(0, 0, 0, 0), 0.5);
    EXPECT_DOUBLE_EQ(d.at(0, 0, 1, 1), 0.0);
    EXPECT_THROW(area_downsample(m, 3), ShapeError);
}

TEST(Params, StoreIsOrderedAndCounts) {
    ParameterStore store;
    Initializer init(1);
    Conv::make(store, init, "b.conv", 2, 3, 3, same3x3());
    Conv::make(store, init, "a.conv", 2, 3, 1, {}, false);
    std::vector<std::string> names;
    for (const auto& [n, v] : store.all()) names.push_back(n);
    EXPECT_EQ(names, (std::vector<std::string>{"a.conv.weight", "b.conv.bias", "b.conv.weight"}));
    EXPECT_EQ(store.count("a."), 6u);
    EXPECT_EQ(store.count(), 6u + 54u + 3u);
    EXPECT_THROW(store.add("a.conv.weight", Tensor({1, 1, 1, 1})), std::invalid_argument);
}

TEST(Params, InitializerIsDeterministic) {
    Initializer a(5), b(5), c(6);
    EXPECT_EQ(a.conv_kernel(4, 3, 3), b.conv_kernel(4, 3, 3));
    EXPECT_NE(a.conv_kernel(4, 3, 3), c.conv_kernel(4, 3, 3));
}
