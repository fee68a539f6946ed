#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gsattack/adapters.hpp"
#include "gsattack/io.hpp"
#include "test_util.hpp"

namespace gsattack {
namespace {

using testing::max_relative_error;
using testing::numeric_image_gradient;
using testing::random_image;

Detection det(const std::string &cls, double score, Box box = {0, 0, 10, 10}) {
    return {box, cls, score, -1};
}

TEST(MaxTargetConfidence, EmptyListIsZero) {
    EXPECT_EQ(max_target_confidence({}, default_target_classes()).value, 0.0);
    EXPECT_EQ(max_target_confidence({}, default_target_classes()).index, -1);
}

TEST(MaxTargetConfidence, PicksLargestTargetScore) {
    const std::vector<Detection> dets{det("car", 0.7), det("truck", 0.4)};
    const auto t = max_target_confidence(dets, {"car", "truck"});
    EXPECT_EQ(t.value, 0.7);
    EXPECT_EQ(t.index, 0);
}

TEST(MaxTargetConfidence, NoMatchingClassIsZero) {
    const std::vector<Detection> dets{det("car", 0.7), det("truck", 0.4), det("person", 0.9),
                                      det("bicycle", 0.2), det("car", 0.1)};
    EXPECT_EQ(max_target_confidence(dets, {"bus"}).value, 0.0);
}

TEST(MaxTargetConfidence, AddingDetectionNeverDecreases) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    const std::vector<std::string> names{"car", "truck", "bus", "person"};
    std::vector<Detection> dets;
    double prev = 0.0;
    for (int i = 0; i < 40; ++i) {
        dets.push_back(det(names[rng() % names.size()], u(rng)));
        const double now = max_target_confidence(dets, default_target_classes()).value;
        EXPECT_GE(now, prev);
        // enumeration oracle
        double oracle = 0.0;
        for (const auto &d : dets)
            if (d.class_id != "person") oracle = std::max(oracle, d.score);
        EXPECT_EQ(now, oracle);
        prev = now;
    }
}

TEST(Box, IouOfIdenticalAndDisjoint) {
    const Box a{0, 0, 10, 10}, b{20, 20, 30, 30}, c{5, 0, 15, 10};
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    EXPECT_DOUBLE_EQ(iou(a, b), 0.0);
    EXPECT_DOUBLE_EQ(iou(a, c), 50.0 / 150.0);
}

TEST(ReferenceDetector, UniformGrayGivesNoDetections) {
    const ReferenceDetector d(0);
    EXPECT_TRUE(d.detect(Image(64, 64, 3, 0.5)).empty());
    EXPECT_TRUE(d.detect(Image(32, 48, 3, 0.5)).empty());
}

TEST(ReferenceDetector, OwnTemplateGivesOneConfidentDetection) {
    const ReferenceDetector d(0);
    const Image img = d.template_image("car", 64, 64);
    const auto dets = d.detect(img);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].class_id, "car");
    EXPECT_GE(dets[0].score, 0.9);
    // The pattern occupies the pixels that differ from the gray fill.
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            bool patterned = false;
            for (int c = 0; c < 3; ++c) patterned |= img.at(x, y, c) != 0.5;
            if (!patterned) continue;
            EXPECT_GE(x + 0.5, dets[0].box.x1);
            EXPECT_LE(x + 0.5, dets[0].box.x2);
            EXPECT_GE(y + 0.5, dets[0].box.y1);
            EXPECT_LE(y + 0.5, dets[0].box.y2);
        }
    }
}

TEST(ReferenceDetector, EveryClassRecognizesItsTemplate) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ReferenceDetector d(seed);
        for (const auto &cls : d.options().classes) {
            const auto dets = d.detect(d.template_image(cls, 64, 64));
            ASSERT_FALSE(dets.empty());
            EXPECT_EQ(dets[0].class_id, cls);
            EXPECT_GE(dets[0].score, 0.9);
        }
    }
}

TEST(ReferenceDetector, DeterministicAndInputUntouched) {
    const ReferenceDetector d(4);
    const Image img = random_image(64, 64, 3, 9);
    const Image copy = img;
    EXPECT_EQ(d.detect(img), d.detect(img));
    EXPECT_EQ(img, copy);
}

TEST(ReferenceDetector, SameSeedSameParametersDifferentSeedDiffers) {
    const ReferenceDetector a(11), b(11), c(12);
    EXPECT_EQ(a.band_colors("car"), b.band_colors("car"));
    const Image probe = a.template_image("car", 64, 64);
    EXPECT_EQ(a.score_maps(probe)[0], b.score_maps(probe)[0]);
    EXPECT_NE(a.score_maps(probe)[0], c.score_maps(probe)[0]);
}

TEST(ReferenceDetector, BoxesStayInsideImage) {
    const ReferenceDetector d(0);
    Image img(64, 64, 3, 0.5);
    // Template pushed against the top-left corner.
    const Image t = d.template_image("car", 64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = t.at(std::min(63, x + 16), std::min(63, y + 16), c);
    for (const auto &dt : d.detect(img)) {
        EXPECT_GE(dt.box.x1, 0);
        EXPECT_GE(dt.box.y1, 0);
        EXPECT_LE(dt.box.x2, 64);
        EXPECT_LE(dt.box.y2, 64);
        EXPECT_LT(dt.box.x1, dt.box.x2);
        EXPECT_TRUE(std::isfinite(dt.score));
    }
}

double anchored_score(const ReferenceDetector &d, const Image &img, const Detection &dt) {
    const auto &cls = d.options().classes;
    const auto c = std::find(cls.begin(), cls.end(), dt.class_id) - cls.begin();
    return d.score_maps(img)[static_cast<std::size_t>(c)][static_cast<std::size_t>(dt.anchor)];
}

TEST(ReferenceDetector, ScoreGradientMatchesFiniteDifferences) {
    const ReferenceDetector d(0);
    Image img = d.template_image("car", 16, 16);
    const Image noise = random_image(16, 16, 3, 5, -0.1, 0.1);
    accumulate(img, noise);
    const auto dets = d.detect(img);
    ASSERT_FALSE(dets.empty());
    const std::vector<double> w(dets.size(), 1.0);
    Image grad;
    d.score_backward(img, dets, w, grad);
    const Image numeric = numeric_image_gradient(img, [&](const Image &p) {
        double s = 0.0;
        for (const auto &dt : dets) s += anchored_score(d, p, dt);
        return s;
    });
    EXPECT_LE(max_relative_error(grad, numeric), 1e-3);
}

TEST(ReferenceDetector, NonDividingResolutionIsResampled) {
    const ReferenceDetector d(0);
    Image img = d.template_image("car", 40, 30);
    // Pull toward gray so the sigmoid is away from saturation.
    for (double &v : img.values()) v = 0.5 + 0.8 * (v - 0.5);
    accumulate(img, random_image(40, 30, 3, 2, -0.05, 0.05));
    const auto dets = d.detect(img);
    ASSERT_FALSE(dets.empty());
    EXPECT_EQ(dets[0].class_id, "car");
    Image grad;
    d.score_backward(img, std::span(dets).first(1), std::vector<double>{1.0}, grad);
    const Image numeric = numeric_image_gradient(
        img, [&](const Image &p) { return anchored_score(d, p, dets[0]); });
    EXPECT_LE(max_relative_error(grad, numeric), 1e-3);
}

TEST(ReferenceDetector, RejectsNonRgbInput) {
    const ReferenceDetector d(0);
    EXPECT_THROW(d.detect(Image(64, 64, 1)), AdapterFailure);
}

TEST(ReferenceDepthHead, ZeroImageGivesConstantClosedForm) {
    const ReferenceDepthHead h(0);
    const auto &p = h.params();
    const DepthMap d = h.estimate(Image(24, 16, 3, 0.0));
    for (double v : d.values.values()) EXPECT_NEAR(v, p.base_depth * std::exp(-0.5 * p.gain), 1e-12);
}

TEST(ReferenceDepthHead, MidGrayGivesBaseDepth) {
    const ReferenceDepthHead h(3);
    const DepthMap d = h.estimate(Image(16, 16, 3, 0.5));
    for (double v : d.values.values())
        EXPECT_NEAR(v, h.params().base_depth, 1e-12);
}

TEST(ReferenceDepthHead, BrighteningMovesDepthMonotonically) {
    const ReferenceDepthHead h(1);
    ASSERT_GT(h.params().gain, 0.0);
    const Image img = random_image(16, 16, 3, 2, 0.1, 0.8);
    Image brighter = img;
    for (double &v : brighter.values()) v += 0.1;
    const auto a = h.estimate(img), b = h.estimate(brighter);
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_GT(b.values[i], a.values[i]);
}

TEST(ReferenceDepthHead, OutputBoundedBelow) {
    const ReferenceDepthHead h(5);
    const auto d = h.estimate(random_image(20, 12, 3, 8));
    const double floor = h.params().base_depth * std::exp(-0.5 * h.params().gain);
    for (double v : d.values.values()) EXPECT_GE(v, floor);
}

TEST(ReferenceDepthHead, SeedsControlParameters) {
    EXPECT_EQ(ReferenceDepthHead(7).params(), ReferenceDepthHead(7).params());
    const Image probe = random_image(12, 12, 3, 1);
    EXPECT_NE(ReferenceDepthHead(7).estimate(probe).values, ReferenceDepthHead(8).estimate(probe).values);
}

TEST(ReferenceDepthHead, GradientMatchesFiniteDifferences) {
    const ReferenceDepthHead h(2);
    const Image img = random_image(12, 10, 3, 4);
    const Image weights = random_image(12, 10, 1, 6, -1, 1);
    Image grad;
    h.backward(img, weights, grad);
    const Image numeric = numeric_image_gradient(img, [&](const Image &p) {
        const auto d = h.estimate(p);
        double s = 0.0;
        for (std::size_t i = 0; i < d.values.size(); ++i) s += weights[i] * d.values[i];
        return s;
    });
    EXPECT_LE(max_relative_error(grad, numeric), 1e-3);
}

TEST(AdapterRegistry, ParsesSpecs) {
    EXPECT_EQ(make_detector("refdet:3")->id(), "refdet:3");
    EXPECT_TRUE(make_detector("refdet:3")->differentiable());
    EXPECT_EQ(make_depth_estimator("refdepth:9")->id(), "refdepth:9");
    EXPECT_FALSE(make_detector("subprocess:true")->differentiable());
    EXPECT_THROW(make_detector("yolo"), ConfigError);
    EXPECT_THROW(make_detector("refdet:x"), ConfigError);
    EXPECT_THROW(make_depth_estimator("refdet:1"), ConfigError);
}

TEST(AdapterRegistry, NonDifferentiableAdapterRefusesGradients) {
    const auto d = make_detector("subprocess:true");
    Image g;
    EXPECT_THROW(d->score_backward(Image(4, 4, 3), {}, {}, g), AdapterFailure);
}

class SubprocessAdapters : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() / ("gsattack-sub-" + std::to_string(getpid()));
        std::filesystem::create_directories(dir_);
        write_text(dir_ / "model.py", R"PY(
import json, struct, sys
req = json.loads(sys.stdin.readline())
with open(req["image_path"], "rb") as f:
    data = f.read()
magic, dims, scale, rest = data.split(b"\n", 3)
w, h = map(int, dims.split())
vals = struct.unpack("<%df" % (w * h * 3), rest[: w * h * 12])
mean = sum(vals) / len(vals)
if req["task"] == "detect":
    print(json.dumps({"detections": [
        {"box": [1, 2, w + 5, h - 1], "class": "car", "score": mean},
        {"box": [0, 0, 2, 2], "class": "person", "score": 0.25}]}))
else:
    out = req["image_path"] + ".depth.pfm"
    with open(out, "wb") as f:
        f.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        f.write(struct.pack("<%df" % (w * h), *([1.0 + mean] * (w * h))))
    print(json.dumps({"depth_path": out}))
)PY");
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::string command() const { return "python3 " + (dir_ / "model.py").string(); }

    std::filesystem::path dir_;
};

TEST_F(SubprocessAdapters, DetectorRoundTrip) {
    const SubprocessDetector d(command(), "ext");
    const auto dets = d.detect(Image(8, 6, 3, 0.25));
    ASSERT_EQ(dets.size(), 2u);
    EXPECT_EQ(dets[0].class_id, "car");
    EXPECT_NEAR(dets[0].score, 0.25, 1e-7);
    EXPECT_EQ(dets[0].box, (Box{1, 2, 8, 5})); // clipped to the image
    EXPECT_EQ(dets[1].class_id, "person");
}

TEST_F(SubprocessAdapters, DepthRoundTrip) {
    const SubprocessDepth d(command(), "ext");
    const auto depth = d.estimate(Image(5, 7, 3, 0.5));
    ASSERT_EQ(depth.values.width(), 5);
    ASSERT_EQ(depth.values.height(), 7);
    for (double v : depth.values.values()) EXPECT_NEAR(v, 1.5, 1e-7);
}

TEST_F(SubprocessAdapters, FailuresBecomeAdapterFailure) {
    EXPECT_THROW(SubprocessDetector("exit 3", "bad").detect(Image(4, 4, 3)), AdapterFailure);
    EXPECT_THROW(SubprocessDetector("echo not-json", "bad").detect(Image(4, 4, 3)), AdapterFailure);
    EXPECT_THROW(SubprocessDepth("echo '{}'", "bad").estimate(Image(4, 4, 3)), AdapterFailure);
}

TEST_F(SubprocessAdapters, TimeoutKillsTheCommand) {
    setenv("GSATTACK_ADAPTER_TIMEOUT", "0.3", 1);
    EXPECT_EQ(adapter_timeout().count(), 300);
    const auto start = std::chrono::steady_clock::now();
    EXPECT_THROW(SubprocessDetector("exec sleep 5", "slow").detect(Image(4, 4, 3)), AdapterFailure);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
    unsetenv("GSATTACK_ADAPTER_TIMEOUT");
}

TEST(PfmIo, RoundTripsFloatPrecision) {
    const auto path = std::filesystem::temp_directory_path() / "gsattack-rt.pfm";
    const Image img = random_image(7, 5, 3, 12);
    write_pfm(img, path);
    const Image back = read_pfm(path);
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(back[i], static_cast<float>(img[i]));
    std::filesystem::remove(path);
}

} // namespace
} // namespace gsattack
