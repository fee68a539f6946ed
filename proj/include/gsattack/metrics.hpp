#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsattack/adapters.hpp"
#include "gsattack/camera.hpp"
#include "gsattack/gaussians.hpp"
#include "gsattack/renderer.hpp"
#include "gsattack/roi.hpp"

namespace gsattack {

struct GroundTruthBox {
    Box box;
    std::string class_id;
};

/// All-point interpolated AP at IoU >= 0.5, averaged over the classes of
/// `classes` that occur in the ground truth. preds[v] and gts[v] belong to
/// view v. Throws NoGroundTruth when no ground truth box of a listed class
/// exists.
double map_at_50(const std::vector<std::vector<Detection>> &preds,
                 const std::vector<std::vector<GroundTruthBox>> &gts, const ClassSet &classes);

struct DepthErrors {
    double absrel = 0.0;
    double rmse = 0.0;     // linear depth
    double rmse_log = 0.0; // same formula on log depths
};

/// Errors of d against positive dgt over the mask. Throws EmptyMask.
DepthErrors absrel_rmse(const Image &d, const Image &dgt, const ROIMask &mask);

/// ROI-mean of log(d + eps) - log(d0 + eps); nullopt on an empty mask.
std::optional<double> delta_sigma(const Image &d, const Image &d0, const ROIMask &mask,
                                  double eps);

/// (clean - adv) / clean. Throws ValueDomain when clean <= 0.
double tnr_det(double map_clean, double map_adv);
/// (adv - clean) / clean. Throws ValueDomain when clean <= 0.
double tnr_depth(double absrel_clean, double absrel_adv);

/// Tight pixel box of alpha > threshold, nullopt when no pixel qualifies.
std::optional<Box> alpha_box(const Image &alpha, double threshold = 0.5);

/// Per-view record of a clean/adversarial comparison. This is what run
/// manifests persist; `summarize` rebuilds every aggregate from it.
struct ViewEval {
    std::string view_id;
    std::optional<Box> gt_box;
    std::vector<Detection> clean_detections;
    std::vector<Detection> adv_detections;
    double clean_confidence = 0.0; // max target-class score
    double adv_confidence = 0.0;
    bool mask_empty = true;
    DepthErrors clean_errors;
    DepthErrors adv_errors;
    double delta_sigma = 0.0; // meaningful only when !mask_empty
};

struct MetricBundle {
    double map50 = 0.0;
    double absrel = 0.0;
    double rmse = 0.0;
    double rmse_log = 0.0;
    double delta_sigma_mean = 0.0;
    std::vector<double> delta_sigma_per_view;
    double sign_agreement = 0.0;
    double mean_confidence = 0.0;
};

struct EvalSummary {
    MetricBundle clean;
    MetricBundle adv;
    double tnr_det = 0.0;   // NaN when clean mAP is zero
    double tnr_depth = 0.0; // NaN when clean AbsRel is zero
};

struct EvalSettings {
    ClassSet classes = default_target_classes();
    std::string gt_class = "car";
    double epsilon = 1e-6;
    int sign = +1;
    RenderSettings render;
    double mask_rho = 0.8; // shrink of the ground-truth box used as evaluation mask
};

/// Aggregates per-view records: mAP over all views, depth errors and
/// delta-sigma averaged over views with nonempty masks, sign agreement as
/// the fraction of those views with sign(delta_sigma) == sign.
EvalSummary summarize(std::span<const ViewEval> views, const EvalSettings &settings);

/// Renders g0 and g in every view, runs both models, and compares them.
/// Depth ground truth is the clean geometric depth. `masks` selects the
/// per-view evaluation region; when empty, the ground-truth box shrunk by
/// `settings.mask_rho` is used.
std::vector<ViewEval> evaluate_scene(const GaussianSet &g, const GaussianSet &g0,
                                     const ViewSet &views, const Detector &detector,
                                     const DepthEstimator &depth, const EvalSettings &settings,
                                     std::span<const ROIMask> masks = {});

/// Evaluation mask from the ground-truth box of a clean alpha map.
ROIMask ground_truth_mask(const Image &clean_alpha, double rho = 0.8);

} // namespace gsattack
