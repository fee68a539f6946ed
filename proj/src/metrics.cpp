#include "gsattack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gsattack {

double map_at_50(const std::vector<std::vector<Detection>> &preds,
                 const std::vector<std::vector<GroundTruthBox>> &gts, const ClassSet &classes) {
    if (preds.size() != gts.size()) throw ShapeMismatch("map_at_50: one prediction list per view");
    double ap_sum = 0.0;
    int present = 0;
    for (const auto &cls : classes) {
        std::size_t n_gt = 0;
        for (const auto &view : gts)
            for (const auto &g : view) n_gt += g.class_id == cls;
        if (n_gt == 0) continue;
        ++present;

        struct Ranked {
            double score;
            std::size_t view;
            const Box *box;
        };
        std::vector<Ranked> ranked;
        for (std::size_t v = 0; v < preds.size(); ++v)
            for (const auto &p : preds[v])
                if (p.class_id == cls) ranked.push_back({p.score, v, &p.box});
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const Ranked &a, const Ranked &b) { return a.score > b.score; });

        std::vector<std::vector<bool>> used(gts.size());
        for (std::size_t v = 0; v < gts.size(); ++v) used[v].assign(gts[v].size(), false);
        std::vector<double> precision, recall;
        std::size_t tp = 0;
        for (std::size_t k = 0; k < ranked.size(); ++k) {
            const auto &r = ranked[k];
            double best = 0.0;
            int best_j = -1;
            for (std::size_t j = 0; j < gts[r.view].size(); ++j) {
                if (gts[r.view][j].class_id != cls) continue;
                const double o = iou(*r.box, gts[r.view][j].box);
                if (o > best) {
                    best = o;
                    best_j = static_cast<int>(j);
                }
            }
            if (best_j >= 0 && best >= 0.5 && !used[r.view][static_cast<std::size_t>(best_j)]) {
                used[r.view][static_cast<std::size_t>(best_j)] = true;
                ++tp;
            }
            precision.push_back(double(tp) / double(k + 1));
            recall.push_back(double(tp) / double(n_gt));
        }
        // All-point interpolation: precision envelope integrated over recall.
        for (std::size_t k = precision.size(); k-- > 1;)
            precision[k - 1] = std::max(precision[k - 1], precision[k]);
        double ap = 0.0, prev_recall = 0.0;
        for (std::size_t k = 0; k < precision.size(); ++k) {
            ap += (recall[k] - prev_recall) * precision[k];
            prev_recall = recall[k];
        }
        ap_sum += ap;
    }
    if (present == 0) throw NoGroundTruth("no ground-truth box of a target class");
    return ap_sum / present;
}

DepthErrors absrel_rmse(const Image &d, const Image &dgt, const ROIMask &mask) {
    require_same_shape(d, dgt, "absrel_rmse");
    if (d.width() != mask.width || d.height() != mask.height || d.channels() != 1) {
        throw ShapeMismatch("absrel_rmse: mask shape differs");
    }
    if (mask.empty()) throw EmptyMask("depth errors need a nonempty mask");
    double rel = 0.0, sq = 0.0, sq_log = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!mask.mask[i]) continue;
        if (!(dgt[i] > 0.0)) throw ValueDomain("ground-truth depth must be positive in the mask");
        rel += std::abs(d[i] - dgt[i]) / dgt[i];
        sq += (d[i] - dgt[i]) * (d[i] - dgt[i]);
        const double l = std::log(d[i]) - std::log(dgt[i]);
        sq_log += l * l;
    }
    const double n = double(mask.area);
    return {rel / n, std::sqrt(sq / n), std::sqrt(sq_log / n)};
}

std::optional<double> delta_sigma(const Image &d, const Image &d0, const ROIMask &mask,
                                  double eps) {
    require_same_shape(d, d0, "delta_sigma");
    if (d.width() != mask.width || d.height() != mask.height) {
        throw ShapeMismatch("delta_sigma: mask shape differs");
    }
    if (mask.empty()) return std::nullopt;
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (mask.mask[i]) acc += std::log(d[i] + eps) - std::log(d0[i] + eps);
    return acc / double(mask.area);
}

double tnr_det(double map_clean, double map_adv) {
    if (!(map_clean > 0.0)) throw ValueDomain("clean mAP must be positive");
    return (map_clean - map_adv) / map_clean;
}

double tnr_depth(double absrel_clean, double absrel_adv) {
    if (!(absrel_clean > 0.0)) throw ValueDomain("clean AbsRel must be positive");
    return (absrel_adv - absrel_clean) / absrel_clean;
}

std::optional<Box> alpha_box(const Image &alpha, double threshold) {
    int x0 = alpha.width(), y0 = alpha.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < alpha.height(); ++y)
        for (int x = 0; x < alpha.width(); ++x)
            if (alpha.at(x, y) > threshold) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return std::nullopt;
    return Box{double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

ROIMask ground_truth_mask(const Image &clean_alpha, double rho) {
    const auto box = alpha_box(clean_alpha);
    if (!box) return ROIMask::empty_mask(clean_alpha.width(), clean_alpha.height());
    const std::vector<Detection> gt{{*box, "gt", 1.0, -1}};
    return build_roi(gt, {"gt"}, 0.0, rho, clean_alpha.width(), clean_alpha.height());
}

namespace {

double mean(const std::vector<double> &v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

MetricBundle bundle(std::span<const ViewEval> views, const EvalSettings &settings, bool adv) {
    MetricBundle b;
    std::vector<std::vector<Detection>> preds;
    std::vector<std::vector<GroundTruthBox>> gts;
    std::vector<double> absrel, rmse, rmse_log, conf;
    std::size_t agree = 0;
    for (const auto &v : views) {
        preds.push_back(adv ? v.adv_detections : v.clean_detections);
        gts.emplace_back();
        if (v.gt_box) gts.back().push_back({*v.gt_box, settings.gt_class});
        conf.push_back(adv ? v.adv_confidence : v.clean_confidence);
        if (v.mask_empty) continue;
        const DepthErrors &e = adv ? v.adv_errors : v.clean_errors;
        absrel.push_back(e.absrel);
        rmse.push_back(e.rmse);
        rmse_log.push_back(e.rmse_log);
        const double ds = adv ? v.delta_sigma : 0.0;
        b.delta_sigma_per_view.push_back(ds);
        agree += (ds > 0 && settings.sign > 0) || (ds < 0 && settings.sign < 0);
    }
    try {
        b.map50 = map_at_50(preds, gts, {settings.gt_class});
    } catch (const NoGroundTruth &) {
        b.map50 = std::numeric_limits<double>::quiet_NaN();
    }
    b.absrel = mean(absrel);
    b.rmse = mean(rmse);
    b.rmse_log = mean(rmse_log);
    b.delta_sigma_mean = mean(b.delta_sigma_per_view);
    b.sign_agreement = b.delta_sigma_per_view.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : double(agree) / double(b.delta_sigma_per_view.size());
    b.mean_confidence = mean(conf);
    return b;
}

} // namespace

EvalSummary summarize(std::span<const ViewEval> views, const EvalSettings &settings) {
    EvalSummary s;
    s.clean = bundle(views, settings, false);
    s.adv = bundle(views, settings, true);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.tnr_det = s.clean.map50 > 0 ? tnr_det(s.clean.map50, s.adv.map50) : nan;
    s.tnr_depth = s.clean.absrel > 0 ? tnr_depth(s.clean.absrel, s.adv.absrel) : nan;
    return s;
}

std::vector<ViewEval> evaluate_scene(const GaussianSet &g, const GaussianSet &g0,
                                     const ViewSet &views, const Detector &detector,
                                     const DepthEstimator &depth, const EvalSettings &settings,
                                     std::span<const ROIMask> masks) {
    if (!masks.empty() && masks.size() != views.size()) {
        throw ShapeMismatch("evaluate_scene: one mask per view");
    }
    std::vector<ViewEval> out;
    for (std::size_t i = 0; i < views.size(); ++i) {
        const View &view = views[i];
        const RenderOutput clean = render(g0, view, settings.render);
        const RenderOutput adv = render(g, view, settings.render);
        ViewEval e;
        e.view_id = view.id;
        e.gt_box = alpha_box(clean.alpha);
        const ROIMask mask = masks.empty() ? ground_truth_mask(clean.alpha, settings.mask_rho) : masks[i];
        e.clean_detections = detector.detect(clean.rgb);
        e.adv_detections = detector.detect(adv.rgb);
        e.clean_confidence = max_target_confidence(e.clean_detections, settings.classes).value;
        e.adv_confidence = max_target_confidence(e.adv_detections, settings.classes).value;
        e.mask_empty = mask.empty();
        if (!e.mask_empty) {
            const Image d0 = depth.estimate(clean.rgb).values;
            const Image d = depth.estimate(adv.rgb).values;
            e.clean_errors = absrel_rmse(d0, clean.geo_depth, mask);
            e.adv_errors = absrel_rmse(d, clean.geo_depth, mask);
            e.delta_sigma = *delta_sigma(d, d0, mask, settings.epsilon);
        }
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace gsattack
