#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsattack/adapters.hpp"
#include "gsattack/camera.hpp"
#include "gsattack/eot.hpp"
#include "gsattack/gaussians.hpp"
#include "gsattack/losses.hpp"
#include "gsattack/renderer.hpp"
#include "gsattack/roi.hpp"

namespace gsattack {

enum class Protocol { Joint, DetOnly, DepthOnly };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string &s);

struct OptimizerConfig {
    std::string kind = "adam"; // "adam" or "sgd"
    double lr_position = 1e-4;
    double lr_opacity = 1e-3;
    double lr_scale = 1e-4;
    double lr_rotation = 1e-4;
    double lr_color = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const OptimizerConfig &) const = default;
};

struct AttackConfig {
    Protocol protocol = Protocol::Joint;
    LossWeights weights;
    DepthTarget target{+1, 0.05};
    EotConfig eot;
    OptimizerConfig optimizer;
    int steps = 1000;
    ClassSet classes = default_target_classes();
    RoiSettings roi;
    RenderSettings render;
    std::uint64_t seed = 0;
    /// Evaluate views on worker threads.
    bool parallel = true;

    /// Weights after protocol switches: det_only zeroes the depth weight,
    /// depth_only zeroes the detection weight.
    LossWeights effective_weights() const;

    bool operator==(const AttackConfig &) const = default;
};

struct AttackModels {
    std::shared_ptr<const Detector> detector;
    std::shared_ptr<const DepthEstimator> depth;
};

struct CleanView {
    RenderOutput render;
    DepthMap depth;
    std::vector<Detection> detections;
    ROIMask roi;
};

/// Per-view clean references computed once from the baseline set.
struct CleanCache {
    std::vector<CleanView> views;

    std::vector<bool> empty_roi() const;
};

/// Renders g0 in every view, runs both models and builds the ROIs from the
/// clean detections (or takes `fixed_rois` verbatim when given).
CleanCache prepare(const GaussianSet &g0, const ViewSet &views, const AttackModels &models,
                   const AttackConfig &cfg, const std::vector<ROIMask> *fixed_rois = nullptr);

/// Everything one attack needs besides the evolving Gaussian set.
struct AttackProblem {
    GaussianSet baseline;
    ViewSet views;
    AttackModels models;
    AttackConfig config;
    CleanCache cache;
    std::optional<std::vector<ROIMask>> fixed_rois;
};

AttackProblem make_problem(GaussianSet g0, ViewSet views, AttackModels models, AttackConfig cfg,
                           std::optional<std::vector<ROIMask>> fixed_rois = std::nullopt);

struct Evaluation {
    LossBreakdown losses;
    GaussianSet grad; // d(total)/d(g), empty unless requested
    /// Max target confidence per view under each EOT sample (detection branch).
    std::vector<std::vector<double>> confidences;
};

/// Full forward pass of the composite objective at `g`; `step` selects the
/// EOT draws. With `with_grad`, also the backward pass to all 14 DoF.
/// Terms whose weight is zero are neither evaluated nor differentiated and
/// are reported as 0. Throws NonFiniteLoss naming the offending term/view.
Evaluation evaluate_objective(const GaussianSet &g, const AttackProblem &problem,
                              std::uint64_t step, bool with_grad);

/// Per-group learning-rate first-order optimizer (Adam or plain gradient
/// descent) over the flattened N x 14 parameters.
class Optimizer {
public:
    Optimizer(const OptimizerConfig &cfg, std::size_t n);

    void step(GaussianSet &g, const GaussianSet &grad);
    std::uint64_t iterations() const { return t_; }

private:
    OptimizerConfig cfg_;
    Eigen::VectorXd lr_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    std::uint64_t t_ = 0;
};

struct StepResult {
    LossBreakdown losses;
    double grad_norm = 0.0;
};

/// One forward/backward/update/projection cycle. Updates `g` in place.
StepResult attack_step(GaussianSet &g, AttackProblem &problem, Optimizer &opt,
                       std::uint64_t step);

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;
    int image_interval = 50; // renders/{step}/ cadence
    bool verbose = false;
};

struct RunRecord {
    GaussianSet final_set;
    std::vector<LossBreakdown> trajectory; // one entry per executed step
    CleanCache cache;
};

/// Runs `cfg.steps` attack steps from g0. When an output directory is set,
/// writes config-independent artifacts: losses.csv, renders/, masks/,
/// final.ply. (The CLI adds config.snapshot and manifest.json.)
RunRecord run_attack(const GaussianSet &g0, const ViewSet &views, const AttackModels &models,
                     const AttackConfig &cfg, const RunOptions &options = {},
                     std::optional<std::vector<ROIMask>> fixed_rois = std::nullopt);

/// CSV header and row formatting of the loss log.
std::string losses_csv_header();
std::string losses_csv_row(std::size_t iteration, const LossBreakdown &b);

} // namespace gsattack
