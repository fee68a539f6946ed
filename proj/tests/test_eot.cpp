#include <gtest/gtest.h>

#include "gsattack/eot.hpp"
#include "test_util.hpp"

namespace gsattack {
namespace {

using testing::max_relative_error;
using testing::numeric_image_gradient;
using testing::random_image;

EotConfig with_mode(EotMode m, std::uint64_t seed = 5) {
    EotConfig c;
    c.mode = m;
    c.seed = seed;
    return c;
}

TEST(Eot, OffIsBitExactIdentity) {
    const Image img = random_image(9, 7, 3, 1);
    const auto ts = transforms_for(with_mode(EotMode::Off), 3, 1);
    ASSERT_EQ(ts.size(), 1u);
    EXPECT_TRUE(ts[0].is_identity());
    EXPECT_EQ(ts[0].apply(img), img);
}

TEST(Eot, PartialIsPhotometricAndReproducible) {
    const auto a = transforms_for(with_mode(EotMode::Partial), 10, 2);
    const auto b = transforms_for(with_mode(EotMode::Partial), 10, 2);
    ASSERT_EQ(a.size(), 4u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_FALSE(a[i].params().geometric);
        EXPECT_EQ(a[i].params().brightness, b[i].params().brightness);
        EXPECT_EQ(a[i].params().contrast, b[i].params().contrast);
        EXPECT_GE(a[i].params().brightness, 0.8);
        EXPECT_LE(a[i].params().brightness, 1.2);
    }
    EXPECT_NE(a[0].params().brightness, a[1].params().brightness);
    const auto other = transforms_for(with_mode(EotMode::Partial), 11, 2);
    EXPECT_NE(a[0].params().brightness, other[0].params().brightness);
}

TEST(Eot, OnPreservesShapeAndRange) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Image img = random_image(16, 12, 3, s);
        for (const auto &t : transforms_for(with_mode(EotMode::On, s), s, 0)) {
            EXPECT_TRUE(t.params().geometric);
            const Image out = t.apply(img);
            ASSERT_TRUE(out.same_shape(img));
            for (double v : out.values()) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
        }
    }
}

TEST(Eot, SameSeedSameOutputs) {
    const Image img = random_image(8, 8, 3, 3);
    const auto a = transforms_for(with_mode(EotMode::On, 9), 4, 1);
    const auto b = transforms_for(with_mode(EotMode::On, 9), 4, 1);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].apply(img), b[i].apply(img));
}

double weighted_sum(const Image &img, const Image &w) {
    double s = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) s += img[i] * w[i];
    return s;
}

TEST(Eot, ExpectationExamples) {
    const Image img = random_image(8, 8, 3, 4);
    const Image w = random_image(8, 8, 3, 5, -1, 1);
    const auto f = [&](const Image &i) { return weighted_sum(i, w); };
    const auto off = transforms_for(with_mode(EotMode::Off), 0, 0);
    EXPECT_EQ(expect_over_transforms(img, off, f), f(img));
    const auto on = transforms_for(with_mode(EotMode::On), 0, 0);
    EXPECT_EQ(expect_over_transforms(img, on, [](const Image &) { return 2.5; }), 2.5);
    double explicit_mean = 0.0;
    for (int s = 0; s < 4; ++s) {
        std::mt19937_64 rng(derive_seed(5, 0, 0, static_cast<std::uint64_t>(s)));
        explicit_mean += f(sample_transform(with_mode(EotMode::On), rng).apply(img)) / 4.0;
    }
    const double got = expect_over_transforms(img, on, f);
    EXPECT_NEAR(got, explicit_mean, 1e-12 * std::abs(explicit_mean));
}

TEST(Eot, WarpGradientMatchesFiniteDifferences) {
    // Keep values away from the clamp so the operator is smooth.
    const Image img = random_image(8, 8, 3, 6, 0.3, 0.7);
    const Image w = random_image(8, 8, 3, 7, -1, 1);
    for (const auto &t : transforms_for(with_mode(EotMode::On, 3), 1, 1)) {
        TransformParams p = t.params();
        p.noise_sigma = 0.0;
        const ImageTransform op(p);
        const Image analytic = op.backward(img, w);
        const Image numeric =
            numeric_image_gradient(img, [&](const Image &i) { return weighted_sum(op.apply(i), w); });
        EXPECT_LE(max_relative_error(analytic, numeric), 1e-3);
    }
}

TEST(Eot, PhotometricGradientWithNoise) {
    const Image img = random_image(6, 6, 3, 8, 0.35, 0.65);
    const Image w = random_image(6, 6, 3, 9, -1, 1);
    const auto t = transforms_for(with_mode(EotMode::Partial, 1), 0, 0)[0];
    const Image numeric =
        numeric_image_gradient(img, [&](const Image &i) { return weighted_sum(t.apply(i), w); });
    EXPECT_LE(max_relative_error(t.backward(img, w), numeric), 1e-3);
}

TEST(Eot, ModeStrings) {
    for (auto m : {EotMode::Off, EotMode::Partial, EotMode::On})
        EXPECT_EQ(eot_mode_from_string(to_string(m)), m);
    EXPECT_THROW(eot_mode_from_string("sometimes"), ConfigError);
}

} // namespace
} // namespace gsattack
