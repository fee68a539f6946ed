#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "gsattack/losses.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gsattack {
namespace {

using testing::box_mask;
using testing::hf_oracle;
using testing::max_relative_error;
using testing::numeric_image_gradient;
using testing::random_image;
using testing::tv_oracle;

TEST(DetLoss, ClosedForms) {
    EXPECT_NEAR(det_loss({{0.0}}, 1e-6).value, -std::log(1 + 1e-6), 1e-18);
    EXPECT_NEAR(det_loss({{1.0}}, 1e-6).value, 13.815510557964274, 1e-12);
}

TEST(DetLoss, MatchesDoubleLoopOracle) {
    const std::vector<std::vector<double>> p{{0.1, 0.9}, {0.5, 0.0}, {0.99, 0.3}};
    double oracle = 0.0;
    for (const auto &view : p) {
        double inner = 0.0;
        for (double x : view) inner += -std::log(1 - x + 1e-6);
        oracle += inner / view.size();
    }
    oracle /= p.size();
    EXPECT_NEAR(det_loss(p, 1e-6).value, oracle, 1e-12 * std::abs(oracle));
}

TEST(DetLoss, GradientAndMonotonicity) {
    const std::vector<std::vector<double>> p{{0.1, 0.9, 0.4}, {0.5}};
    const auto out = det_loss(p, 1e-6);
    for (std::size_t v = 0; v < p.size(); ++v) {
        for (std::size_t t = 0; t < p[v].size(); ++t) {
            auto pp = p, pm = p;
            pp[v][t] += 1e-7;
            pm[v][t] -= 1e-7;
            const double num = (det_loss(pp, 1e-6).value - det_loss(pm, 1e-6).value) / 2e-7;
            EXPECT_NEAR(out.grad[v][t], num, 1e-4 * std::abs(num));
            EXPECT_GT(out.grad[v][t], 0.0);
        }
    }
    EXPECT_GE(out.value, -std::log(1 + 1e-6));
}

TEST(LogDepthResidual, ClosedForms) {
    const Image d0 = random_image(6, 4, 1, 1, 1.0, 5.0);
    const Image same = log_depth_residual(d0, d0, 1e-6);
    for (double v : same.values()) EXPECT_EQ(v, 0.0);
    Image d = d0;
    for (double &v : d.values()) v *= 2;
    const Image doubled = log_depth_residual(d, d0, 1e-12);
    for (double v : doubled.values()) EXPECT_NEAR(v, std::log(2.0), 1e-10);
    const Image r = log_depth_residual(d, d0, 1e-6);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double oracle = std::log(d[i] + 1e-6) - std::log(d0[i] + 1e-6);
        EXPECT_NEAR(r[i], oracle, 1e-12 * std::abs(oracle));
    }
    EXPECT_THROW(log_depth_residual(Image(3, 3, 1), Image(3, 2, 1), 1e-6), ShapeMismatch);
}

TEST(DepthLoss, ClosedForms) {
    const std::vector<ROIMask> rois{box_mask(8, 8, 2, 2, 6, 6)};
    std::vector<Image> hit{Image(8, 8, 1, 0.05)};
    EXPECT_EQ(depth_loss(hit, rois, {+1, 0.05}).value, 0.0);
    std::vector<Image> zero{Image(8, 8, 1, 0.0)};
    EXPECT_NEAR(depth_loss(zero, rois, {+1, 0.1}).value, 0.01, 1e-15);
    EXPECT_NEAR(depth_loss(zero, rois, {-1, 0.1}).value, 0.01, 1e-15);
}

TEST(DepthLoss, EmptyRoiViewIsSkipped) {
    const Image r0 = random_image(8, 8, 1, 3, -0.2, 0.2);
    const Image r1 = random_image(8, 8, 1, 4, -0.2, 0.2);
    const ROIMask full = box_mask(8, 8, 1, 1, 7, 5);
    const std::vector<ROIMask> rois{full, ROIMask::empty_mask(8, 8)};
    const std::vector<Image> res{r0, r1};
    const DepthTarget t{-1, 0.07};
    double oracle = 0.0;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            if (full.contains(x, y)) oracle += std::pow(r0.at(x, y) + 0.07, 2);
    oracle /= double(full.area);
    const auto out = depth_loss(res, rois, t);
    EXPECT_NEAR(out.value, oracle, 1e-12 * oracle);
    for (double g : out.grad[1].values()) EXPECT_EQ(g, 0.0);
    const std::vector<ROIMask> none{ROIMask::empty_mask(8, 8), ROIMask::empty_mask(8, 8)};
    EXPECT_EQ(depth_loss(res, none, t).value, 0.0);
}

TEST(DepthLoss, GradientMatchesFiniteDifferences) {
    const std::vector<ROIMask> rois{box_mask(6, 5, 1, 1, 5, 4), box_mask(6, 5, 0, 0, 3, 5)};
    std::vector<Image> res{random_image(6, 5, 1, 5, -0.3, 0.3), random_image(6, 5, 1, 6, -0.3, 0.3)};
    const DepthTarget t{+1, 0.04};
    const auto out = depth_loss(res, rois, t);
    for (std::size_t v = 0; v < res.size(); ++v) {
        const Image numeric = numeric_image_gradient(res[v], [&](const Image &p) {
            auto copy = res;
            copy[v] = p;
            return depth_loss(copy, rois, t).value;
        });
        EXPECT_LE(max_relative_error(out.grad[v], numeric), 1e-4);
    }
}

TEST(LinfBudget, Hinge) {
    const std::vector<Vec3> inside{Vec3(0.05, -0.01, 0.0)};
    EXPECT_EQ(linf_budget_loss(inside, 0.1).value, 0.0);
    const std::vector<Vec3> outside{Vec3(0.01, -0.15, 0.02), Vec3(0.0, 0.1, 0.0)};
    const auto out = linf_budget_loss(outside, 0.1);
    EXPECT_NEAR(out.value, 0.05, 1e-15);
    EXPECT_EQ(out.grad[0], Vec3(0, -1, 0));
    EXPECT_EQ(out.grad[1], Vec3::Zero());
}

TEST(LinfBudget, MatchesEnumeration) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Vec3> d(7);
        for (auto &x : d) x = Vec3(u(rng), u(rng), u(rng));
        double m = 0.0;
        for (const auto &x : d)
            for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(x[c]));
        EXPECT_NEAR(linf_budget_loss(d, 0.3).value, std::max(0.0, m - 0.3), 1e-15);
    }
}

TEST(TvLoss, ClosedForms) {
    const std::vector<Image> constant{Image(5, 5, 3, 0.3)};
    EXPECT_EQ(tv_loss(constant).value, 0.0);
    Image r(2, 2, 1);
    r.at(1, 0) = 1;
    r.at(1, 1) = 1;
    const std::vector<Image> one{r};
    EXPECT_DOUBLE_EQ(tv_loss(one).value, 2.0);
}

TEST(TvLoss, MatchesNaiveOracleAndShiftInvariance) {
    const std::vector<Image> res{random_image(8, 8, 3, 1, -1, 1), random_image(8, 8, 3, 2, -1, 1)};
    const double oracle = 0.5 * (tv_oracle(res[0]) + tv_oracle(res[1]));
    EXPECT_NEAR(tv_loss(res).value, oracle, 1e-10 * oracle);
    auto shifted = res;
    for (auto &img : shifted)
        for (double &v : img.values()) v += 0.37;
    EXPECT_NEAR(tv_loss(shifted).value, oracle, 1e-10 * oracle);
}

TEST(TvLoss, GradientMatchesFiniteDifferences) {
    const std::vector<Image> res{random_image(6, 5, 3, 3, -1, 1)};
    const auto out = tv_loss(res);
    const Image numeric = numeric_image_gradient(res[0], [](const Image &p) {
        return tv_loss(std::vector<Image>{p}).value;
    });
    EXPECT_LE(max_relative_error(out.grad[0], numeric), 1e-4);
}

TEST(HfLoss, RingWeight) {
    EXPECT_EQ(hf_ring_weight(0, 0, 16, 16), 0.0);
    EXPECT_EQ(hf_ring_weight(3, 0, 16, 16), 0.0);  // r = 0.1875
    EXPECT_EQ(hf_ring_weight(4, 0, 16, 16), 1.0);  // r = 0.25
    EXPECT_EQ(hf_ring_weight(8, 0, 16, 16), 1.0);  // r = 0.5
    EXPECT_EQ(hf_ring_weight(12, 0, 16, 16), 1.0); // r = 0.25 (negative frequency)
    EXPECT_EQ(hf_ring_weight(8, 8, 16, 16), 0.0);  // r = 0.707
}

TEST(HfLoss, ConstantResidualIsZero) {
    const std::vector<Image> res{Image(16, 16, 3, 0.42)};
    EXPECT_NEAR(hf_loss(res).value, 0.0, 1e-12);
}

TEST(HfLoss, SinusoidInsideRing) {
    const int n = 16, f0 = 5; // 5/16 = 0.3125 lies in the ring
    Image r(n, n, 1);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) r.at(x, y) = std::cos(2 * std::numbers::pi * f0 * x / n);
    // Two peaks of magnitude n*n/2 each.
    EXPECT_NEAR(hf_loss(std::vector<Image>{r}).value, double(n * n), 1e-9);
}

TEST(HfLoss, MatchesDirectDft) {
    const std::vector<Image> res{random_image(16, 16, 3, 4, -1, 1), random_image(16, 16, 3, 5, -1, 1)};
    const double oracle = 0.5 * (hf_oracle(res[0]) + hf_oracle(res[1]));
    EXPECT_NEAR(hf_loss(res).value, oracle, 1e-8 * oracle);
    const std::vector<Image> odd{random_image(9, 7, 3, 6, -1, 1)};
    EXPECT_NEAR(hf_loss(odd).value, hf_oracle(odd[0]), 1e-8 * hf_oracle(odd[0]));
}

TEST(HfLoss, InvariantToConstantOffset) {
    std::vector<Image> res{random_image(12, 10, 3, 7, -1, 1)};
    const double before = hf_loss(res).value;
    for (double &v : res[0].values()) v += 0.25;
    EXPECT_NEAR(hf_loss(res).value, before, 1e-10 * before);
}

TEST(HfLoss, GradientMatchesFiniteDifferences) {
    const std::vector<Image> res{random_image(8, 6, 3, 8, -1, 1)};
    const auto out = hf_loss(res);
    const Image numeric = numeric_image_gradient(res[0], [](const Image &p) {
        return hf_loss(std::vector<Image>{p}).value;
    });
    EXPECT_LE(max_relative_error(out.grad[0], numeric), 1e-4);
}

TEST(PrintLoss, Composition) {
    LossWeights w;
    EXPECT_EQ(print_loss({0, 0, 0}, w), 0.0);
    w.tv = 0.5;
    w.hf = 0.1;
    EXPECT_NEAR(print_loss({1, 2, 3}, w), 2.3, 1e-15);
}

TEST(TotalLoss, WeightedSum) {
    LossWeights w; // (1, 1, 0.2, 0.1)
    LossBreakdown t;
    t.det = 2;
    t.dep = 0.5;
    t.shape = 1;
    t.linf = 3; // print = 3 + alpha*0 + gamma*0
    const auto out = total_loss(t, w);
    EXPECT_NEAR(out.total, 3.0, 1e-15);
    EXPECT_NEAR(out.print, 3.0, 1e-15);
}

TEST(TotalLoss, ZeroWeightIgnoresTerm) {
    LossWeights w;
    w.dep = 0;
    LossBreakdown a, b;
    a.det = b.det = 1.5;
    a.dep = 0.2;
    b.dep = 97.0;
    EXPECT_EQ(total_loss(a, w).total, total_loss(b, w).total);
}

TEST(TotalLoss, ViewPermutationLeavesValuesUnchanged) {
    std::vector<Image> res{random_image(8, 8, 3, 1), random_image(8, 8, 3, 2), random_image(8, 8, 3, 3)};
    const double tv = tv_loss(res).value, hf = hf_loss(res).value;
    std::swap(res[0], res[2]);
    EXPECT_NEAR(tv_loss(res).value, tv, 1e-12 * tv);
    EXPECT_NEAR(hf_loss(res).value, hf, 1e-12 * hf);
}

TEST(LossWeights, Validation) {
    LossWeights w;
    EXPECT_NO_THROW(w.validate());
    w.tv = -1;
    EXPECT_THROW(w.validate(), ConfigError);
    w = {};
    w.delta = 0;
    EXPECT_THROW(w.validate(), ConfigError);
}

} // namespace
} // namespace gsattack

namespace gsattack {
namespace {

TEST(ShapeLoss, MatchesScalarOracleAndGradient) {
    const GaussianSet g0 = testing::random_gaussians(5, 21);
    GaussianSet g = testing::random_gaussians(5, 22);
    g.opacities = g0.opacities;
    g.colors = g0.colors;
    const ShapeWeights w{0.7, 1.3, 0.4, 2.0};
    const double oracle = testing::shape_oracle(g, g0, w);
    EXPECT_NEAR(shape_loss(g, g0, w), oracle, 1e-12 * oracle);
    GaussianSet grad = g.zeros_like();
    shape_loss(g, g0, w, grad, 1.0);
    const auto numeric = testing::numeric_gradient(
        g, [&](const GaussianSet &x) { return shape_loss(x, g0, w); }, [](int) { return 1e-6; });
    EXPECT_LE(testing::max_relative_error(grad.flatten(), numeric), 1e-6);
    EXPECT_EQ(shape_loss(g0, g0, ShapeWeights{1, 1, 1, 0}), 0.0);
}

} // namespace
} // namespace gsattack
