#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <limits>

#include "gsattack/attack.hpp"
#include "gsattack/metrics.hpp"
#include "gsattack/toy_scene.hpp"

namespace gsattack {
namespace {

struct Toy {
    GaussianSet g0 = make_toy_vehicle();
    ViewSet views = make_orbit_views(toy_orbit());
    AttackModels models{make_detector("refdet:0"), make_depth_estimator("refdepth:0")};
};

AttackConfig quiet_config(int steps) {
    AttackConfig cfg;
    cfg.steps = steps;
    cfg.eot.samples = 2;
    cfg.parallel = false;
    return cfg;
}

double max_abs(const GaussianSet &g) { return g.flatten().cwiseAbs().maxCoeff(); }

TEST(Prepare, IdempotentAndMatchesDirectEstimate) {
    Toy t;
    const AttackConfig cfg = quiet_config(0);
    const CleanCache a = prepare(t.g0, t.views, t.models, cfg);
    const CleanCache b = prepare(t.g0, t.views, t.models, cfg);
    ASSERT_EQ(a.views.size(), t.views.size());
    for (std::size_t v = 0; v < t.views.size(); ++v) {
        EXPECT_EQ(a.views[v].depth.values, b.views[v].depth.values);
        EXPECT_EQ(a.views[v].detections, b.views[v].detections);
        EXPECT_EQ(a.views[v].roi, b.views[v].roi);
        const Image direct = t.models.depth->estimate(render(t.g0, t.views[v], cfg.render).rgb).values;
        EXPECT_EQ(a.views[v].depth.values, direct);
        EXPECT_FALSE(a.views[v].roi.empty());
    }
}

TEST(Prepare, InvisibleViewIsFlagged) {
    Toy t;
    View away = look_at({8, 0, 0}, {16, 0, 0});
    away.fov_y = t.views[0].fov_y;
    away.width = away.height = 64;
    away.id = "away";
    t.views.push_back(away);
    const auto flags = prepare(t.g0, t.views, t.models, quiet_config(0)).empty_roi();
    EXPECT_EQ(flags, (std::vector<bool>{false, false, false, false, true}));
}

TEST(AttackStep, AllWeightsZeroLeavesSetUnchanged) {
    Toy t;
    AttackConfig cfg = quiet_config(1);
    cfg.weights.det = cfg.weights.dep = cfg.weights.shape = cfg.weights.print = 0;
    AttackProblem p = make_problem(t.g0, t.views, t.models, cfg);
    GaussianSet g = p.baseline;
    Optimizer opt(cfg.optimizer, g.size());
    const StepResult r = attack_step(g, p, opt, 0);
    EXPECT_EQ(r.grad_norm, 0.0);
    EXPECT_EQ(r.losses.total, 0.0);
    EXPECT_EQ(g, p.baseline);
}

TEST(AttackStep, ShapeOnlyStepDescends) {
    Toy t;
    AttackConfig cfg = quiet_config(1);
    cfg.weights.det = cfg.weights.dep = cfg.weights.print = 0;
    cfg.weights.shape = 1.0;
    cfg.optimizer.kind = "sgd";
    AttackProblem p = make_problem(t.g0, t.views, t.models, cfg);
    GaussianSet g = p.baseline;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.positions[i].x() += 0.01 * std::sin(double(i));
        g.scales[i] *= 1.05;
        g.rotations[i] *= 1.02;
    }
    const double before = shape_loss(g, p.baseline, cfg.weights.shape_terms);
    Optimizer opt(cfg.optimizer, g.size());
    const StepResult r = attack_step(g, p, opt, 0);
    EXPECT_DOUBLE_EQ(r.losses.shape, before);
    EXPECT_LT(shape_loss(g, p.baseline, cfg.weights.shape_terms), before);
}

TEST(RunAttack, ZeroStepsReturnsBaseline) {
    Toy t;
    const RunRecord r = run_attack(t.g0, t.views, t.models, quiet_config(0));
    EXPECT_EQ(r.final_set, t.g0);
    EXPECT_TRUE(r.trajectory.empty());
}

TEST(RunAttack, SeededRunsAreReproducible) {
    Toy t;
    AttackConfig cfg = quiet_config(3);
    cfg.seed = 17;
    const RunRecord a = run_attack(t.g0, t.views, t.models, cfg);
    const RunRecord b = run_attack(t.g0, t.views, t.models, cfg);
    ASSERT_EQ(a.trajectory.size(), 3u);
    EXPECT_EQ(a.trajectory, b.trajectory);
    EXPECT_EQ(a.final_set, b.final_set);
    EXPECT_NE(a.final_set, t.g0);
}

TEST(RunAttack, ParallelMatchesSequential) {
    Toy t;
    AttackConfig cfg = quiet_config(2);
    const RunRecord a = run_attack(t.g0, t.views, t.models, cfg);
    cfg.parallel = true;
    const RunRecord b = run_attack(t.g0, t.views, t.models, cfg);
    EXPECT_EQ(a.trajectory, b.trajectory);
    EXPECT_EQ(a.final_set, b.final_set);
}

TEST(RunAttack, GradientIsFiniteAndFullShape) {
    Toy t;
    const AttackProblem p = make_problem(t.g0, t.views, t.models, quiet_config(1));
    const Evaluation e = evaluate_objective(p.baseline, p, 0, true);
    EXPECT_EQ(e.grad.size(), t.g0.size());
    EXPECT_TRUE(e.grad.flatten().allFinite());
    EXPECT_GT(max_abs(e.grad), 0.0);
}

TEST(RunAttack, DetOnlyIgnoresDepthModel) {
    Toy t;
    AttackConfig cfg = quiet_config(4);
    cfg.protocol = Protocol::DetOnly;
    const RunRecord a = run_attack(t.g0, t.views, t.models, cfg);
    const RunRecord b = run_attack(t.g0, t.views, {t.models.detector, make_depth_estimator("refdepth:1")}, cfg);
    EXPECT_EQ(a.trajectory, b.trajectory);
    EXPECT_EQ(a.final_set, b.final_set);
}

TEST(RunAttack, FrozenModelsAreUnchanged) {
    Toy t;
    const Image probe = render(t.g0, t.views[1]).rgb;
    const auto dets = t.models.detector->detect(probe);
    const Image depth = t.models.depth->estimate(probe).values;
    run_attack(t.g0, t.views, t.models, quiet_config(2));
    EXPECT_EQ(t.models.detector->detect(probe), dets);
    EXPECT_EQ(t.models.depth->estimate(probe).values, depth);
}

std::vector<ROIMask> clean_masks(const Toy &t) {
    std::vector<ROIMask> masks;
    for (const auto &v : t.views) masks.push_back(ground_truth_mask(render(t.g0, v).alpha));
    return masks;
}

TEST(DepthTerm, EmptyRoiViewContributesNothing) {
    Toy t;
    AttackConfig cfg = quiet_config(1);
    cfg.protocol = Protocol::DepthOnly;
    cfg.weights.shape = cfg.weights.print = 0;
    auto masks = clean_masks(t);

    // A lone view with an empty ROI yields exactly zero gradient.
    const AttackProblem lone = make_problem(t.g0, {t.views[2]}, t.models, cfg,
                                            std::vector<ROIMask>{ROIMask::empty_mask(64, 64)});
    const Evaluation e_lone = evaluate_objective(lone.baseline, lone, 0, true);
    EXPECT_EQ(e_lone.losses.dep, 0.0);
    EXPECT_EQ(max_abs(e_lone.grad), 0.0);

    // Adding an empty-ROI view leaves the depth gradient untouched.
    GaussianSet g = t.g0;
    for (auto &c : g.colors) c = (0.9 * c.array() + 0.05).matrix();
    const AttackProblem one = make_problem(t.g0, {t.views[0]}, t.models, cfg, std::vector<ROIMask>{masks[0]});
    const AttackProblem two = make_problem(t.g0, {t.views[0], t.views[2]}, t.models, cfg,
                                           std::vector<ROIMask>{masks[0], ROIMask::empty_mask(64, 64)});
    const Evaluation e1 = evaluate_objective(g, one, 0, true);
    const Evaluation e2 = evaluate_objective(g, two, 0, true);
    EXPECT_EQ(e1.losses.dep, e2.losses.dep);
    EXPECT_GT(max_abs(e1.grad), 0.0);
    EXPECT_EQ(e1.grad.flatten(), e2.grad.flatten());
}

// Returns sane depth for the clean cache, then NaN.
class PoisonedDepth : public DepthEstimator {
public:
    explicit PoisonedDepth(int healthy) : healthy_(healthy) {}
    const std::string &id() const override { return id_; }
    DepthMap estimate(const Image &rgb) const override {
        const double v = calls_++ < healthy_ ? 2.0 : std::numeric_limits<double>::quiet_NaN();
        return {Image(rgb.width(), rgb.height(), 1, v)};
    }
    void backward(const Image &rgb, const Image &, Image &grad_image) const override {
        grad_image = Image(rgb.width(), rgb.height(), 3);
    }

private:
    std::string id_ = "poisoned";
    int healthy_;
    mutable std::atomic<int> calls_{0};
};

TEST(AttackStep, NonFiniteLossAborts) {
    Toy t;
    AttackConfig cfg = quiet_config(1);
    cfg.protocol = Protocol::DepthOnly;
    const AttackModels models{t.models.detector, std::make_shared<PoisonedDepth>(int(t.views.size()))};
    AttackProblem p = make_problem(t.g0, t.views, models, cfg);
    GaussianSet g = p.baseline;
    Optimizer opt(cfg.optimizer, g.size());
    try {
        attack_step(g, p, opt, 0);
        FAIL() << "expected NonFiniteLoss";
    } catch (const NonFiniteLoss &e) {
        EXPECT_NE(std::string(e.what()).find("view0"), std::string::npos) << e.what();
    }
}

TEST(MakeProblem, DepthTermNeedsDepthModel) {
    Toy t;
    EXPECT_THROW(make_problem(t.g0, t.views, {t.models.detector, nullptr}, quiet_config(1)), ConfigError);
    AttackConfig cfg = quiet_config(1);
    cfg.protocol = Protocol::DetOnly;
    EXPECT_NO_THROW(make_problem(t.g0, t.views, {t.models.detector, nullptr}, cfg));
}

TEST(LossesCsv, HeaderAndRow) {
    EXPECT_EQ(losses_csv_header(), "iteration,L_det,L_dep,L_shape,L_inf,L_TV,L_HF,total");
    LossBreakdown b;
    b.det = 0.5;
    b.total = 0.1;
    EXPECT_EQ(losses_csv_row(3, b), "3,0.5,0,0,0,0,0,0.10000000000000001");
}

} // namespace
} // namespace gsattack
