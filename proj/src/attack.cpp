#include "gsattack/attack.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>

#include "gsattack/io.hpp"

namespace gsattack {

std::string to_string(Protocol p) {
    switch (p) {
    case Protocol::Joint: return "joint";
    case Protocol::DetOnly: return "det_only";
    case Protocol::DepthOnly: return "depth_only";
    }
    return "joint";
}

Protocol protocol_from_string(const std::string &s) {
    if (s == "joint") return Protocol::Joint;
    if (s == "det_only") return Protocol::DetOnly;
    if (s == "depth_only") return Protocol::DepthOnly;
    throw ConfigError("unknown protocol '" + s + "'");
}

LossWeights AttackConfig::effective_weights() const {
    LossWeights w = weights;
    if (protocol == Protocol::DetOnly) w.dep = 0.0;
    if (protocol == Protocol::DepthOnly) w.det = 0.0;
    return w;
}

std::vector<bool> CleanCache::empty_roi() const {
    std::vector<bool> out;
    for (const auto &v : views) out.push_back(v.roi.empty());
    return out;
}

CleanCache prepare(const GaussianSet &g0, const ViewSet &views, const AttackModels &models,
                   const AttackConfig &cfg, const std::vector<ROIMask> *fixed_rois) {
    if (!models.detector) throw ConfigError("an attack needs a detector for ROIs and scoring");
    if (fixed_rois && fixed_rois->size() != views.size()) {
        throw ShapeMismatch("fixed ROIs: one mask per view");
    }
    CleanCache cache;
    for (std::size_t i = 0; i < views.size(); ++i) {
        const View &view = views[i];
        CleanView cv;
        cv.render = render(g0, view, cfg.render);
        if (models.depth) cv.depth = models.depth->estimate(cv.render.rgb);
        cv.detections = models.detector->detect(cv.render.rgb);
        if (fixed_rois) {
            cv.roi = (*fixed_rois)[i];
            if (cv.roi.width != view.width || cv.roi.height != view.height) {
                throw ShapeMismatch("fixed ROI does not match view " + view.id);
            }
        } else {
            cv.roi = build_roi(cv.detections, cfg.classes, cfg.roi.score_min, cfg.roi.rho,
                               view.width, view.height);
        }
        cache.views.push_back(std::move(cv));
    }
    return cache;
}

AttackProblem make_problem(GaussianSet g0, ViewSet views, AttackModels models, AttackConfig cfg,
                           std::optional<std::vector<ROIMask>> fixed_rois) {
    g0.check_shape();
    for (const auto &v : views) v.validate();
    if (views.empty()) throw ConfigError("an attack needs at least one view");
    cfg.weights.validate();
    cfg.effective_weights().validate();
    if (cfg.effective_weights().dep > 0 && !models.depth) {
        throw ConfigError("depth term enabled without a depth estimator");
    }
    AttackProblem p{std::move(g0), std::move(views), std::move(models), std::move(cfg), {},
                    std::move(fixed_rois)};
    p.cache = prepare(p.baseline, p.views, p.models, p.config,
                      p.fixed_rois ? &*p.fixed_rois : nullptr);
    return p;
}

namespace {

// Named substreams of the root seed.
constexpr std::uint64_t kStreamEot = 0x656f74;

EotConfig eot_for_run(const AttackConfig &cfg) {
    EotConfig e = cfg.eot;
    e.seed = derive_seed(cfg.seed, kStreamEot);
    return e;
}

struct ViewForward {
    RenderOutput out;
    std::vector<ImageTransform> transforms;
    std::vector<Image> transformed;
    std::vector<std::optional<Detection>> best; // max target detection per sample
    std::vector<double> confidence;
    Image depth;
    Image log_residual;
    Image rgb_residual;
};

template <class F>
void for_each_view(std::size_t n, bool parallel, F &&f) {
    if (!parallel || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < n; ++i) jobs.push_back(std::async(std::launch::async, f, i));
    for (auto &j : jobs) j.get();
}

void require_finite(double value, const std::string &term) {
    if (!std::isfinite(value)) throw NonFiniteLoss(term + " is not finite");
}

} // namespace

Evaluation evaluate_objective(const GaussianSet &g, const AttackProblem &problem,
                              std::uint64_t step, bool with_grad) {
    const AttackConfig &cfg = problem.config;
    const LossWeights w = cfg.effective_weights();
    const std::size_t nv = problem.views.size();
    require_same_size(g, problem.baseline, "evaluate_objective");
    const bool use_det = w.det > 0;
    const bool use_dep = w.dep > 0;
    const bool use_tv = w.print > 0 && w.tv > 0;
    const bool use_hf = w.print > 0 && w.hf > 0;
    const bool parallel = cfg.parallel && problem.models.detector->thread_safe() &&
                          (!problem.models.depth || problem.models.depth->thread_safe());
    const EotConfig eot = eot_for_run(cfg);

    std::vector<ViewForward> fwd(nv);
    for_each_view(nv, parallel, [&](std::size_t v) {
        ViewForward &f = fwd[v];
        const CleanView &clean = problem.cache.views[v];
        f.out = render(g, problem.views[v], cfg.render);
        if (use_det) {
            f.transforms = transforms_for(eot, step, v);
            for (const auto &t : f.transforms) {
                Image img = t.apply(f.out.rgb);
                const auto dets = problem.models.detector->detect(img);
                const auto best = max_target_confidence(dets, cfg.classes);
                f.confidence.push_back(best.value);
                f.best.push_back(best.index >= 0 ? std::optional(dets[static_cast<std::size_t>(best.index)])
                                                 : std::nullopt);
                f.transformed.push_back(std::move(img));
            }
        }
        if (use_dep) {
            f.depth = problem.models.depth->estimate(f.out.rgb).values;
            f.log_residual = log_depth_residual(f.depth, clean.depth.values, w.epsilon);
        }
        if (use_tv || use_hf) f.rgb_residual = subtract(f.out.rgb, clean.render.rgb);
    });

    Evaluation ev;
    LossBreakdown terms;
    WithGrad<std::vector<std::vector<double>>> det;
    WithGrad<std::vector<Image>> dep, tv, hf;
    std::vector<ROIMask> rois;
    for (const auto &c : problem.cache.views) rois.push_back(c.roi);

    if (use_det) {
        for (std::size_t v = 0; v < nv; ++v) {
            for (double p : fwd[v].confidence) {
                require_finite(p, "L_det confidence in view " + problem.views[v].id);
            }
            ev.confidences.push_back(fwd[v].confidence);
        }
        det = det_loss(ev.confidences, w.delta);
        terms.det = det.value;
        require_finite(terms.det, "L_det");
    }
    if (use_dep) {
        std::vector<Image> residuals;
        for (std::size_t v = 0; v < nv; ++v) {
            if (!rois[v].empty() && !all_finite(fwd[v].log_residual)) {
                throw NonFiniteLoss("L_dep residual in view " + problem.views[v].id + " is not finite");
            }
            residuals.push_back(fwd[v].log_residual);
        }
        dep = depth_loss(residuals, rois, cfg.target);
        terms.dep = dep.value;
        require_finite(terms.dep, "L_dep");
    }
    if (w.shape > 0) {
        terms.shape = shape_loss(g, problem.baseline, w.shape_terms);
        require_finite(terms.shape, "L_shape");
    }
    std::vector<Vec3> color_delta;
    WithGrad<std::vector<Vec3>> linf;
    if (w.print > 0) {
        for (std::size_t i = 0; i < g.size(); ++i)
            color_delta.push_back(g.colors[i] - problem.baseline.colors[i]);
        linf = linf_budget_loss(color_delta, w.linf_budget);
        terms.linf = linf.value;
        require_finite(terms.linf, "L_inf");
    }
    if (use_tv || use_hf) {
        std::vector<Image> residuals;
        for (auto &f : fwd) residuals.push_back(f.rgb_residual);
        if (use_tv) {
            tv = tv_loss(residuals);
            terms.tv = tv.value;
            require_finite(terms.tv, "L_TV");
        }
        if (use_hf) {
            hf = hf_loss(residuals);
            terms.hf = hf.value;
            require_finite(terms.hf, "L_HF");
        }
    }
    ev.losses = total_loss(terms, w);
    require_finite(ev.losses.total, "total loss");
    if (!with_grad) return ev;

    std::vector<GaussianSet> view_grads(nv);
    for_each_view(nv, parallel, [&](std::size_t v) {
        const ViewForward &f = fwd[v];
        const View &view = problem.views[v];
        Image grad_rgb(view.width, view.height, 3);
        bool any = false;
        if (use_det) {
            for (std::size_t t = 0; t < f.transforms.size(); ++t) {
                const double weight = w.det * det.grad[v][t];
                if (!f.best[t] || weight == 0.0) continue;
                Image g_img;
                problem.models.detector->score_backward(f.transformed[t], std::span(&*f.best[t], 1),
                                                        std::span(&weight, 1), g_img);
                accumulate(grad_rgb, f.transforms[t].backward(f.out.rgb, g_img));
                any = true;
            }
        }
        // Views with an empty ROI are skipped outright, so their depth-term
        // gradient is exactly zero.
        if (use_dep && !rois[v].empty()) {
            Image g_depth(view.width, view.height, 1);
            for (std::size_t i = 0; i < g_depth.size(); ++i)
                g_depth[i] = w.dep * dep.grad[v][i] / (f.depth[i] + w.epsilon);
            problem.models.depth->backward(f.out.rgb, g_depth, grad_rgb);
            any = true;
        }
        if (use_tv) {
            accumulate(grad_rgb, tv.grad[v], w.print * w.tv);
            any = true;
        }
        if (use_hf) {
            accumulate(grad_rgb, hf.grad[v], w.print * w.hf);
            any = true;
        }
        view_grads[v] = g.zeros_like();
        if (any) {
            RenderGrad up;
            up.rgb = std::move(grad_rgb);
            render_backward(g, view, up, view_grads[v], cfg.render);
        }
    });

    ev.grad = g.zeros_like();
    for (const auto &vg : view_grads) ev.grad += vg;
    if (w.shape > 0) shape_loss(g, problem.baseline, w.shape_terms, ev.grad, w.shape);
    if (w.print > 0) {
        for (std::size_t i = 0; i < g.size(); ++i) ev.grad.colors[i] += w.print * linf.grad[i];
    }
    if (!ev.grad.flatten().allFinite()) throw NonFiniteLoss("gradient is not finite");
    return ev;
}

Optimizer::Optimizer(const OptimizerConfig &cfg, std::size_t n) : cfg_(cfg) {
    if (cfg_.kind != "adam" && cfg_.kind != "sgd") {
        throw ConfigError("unknown optimizer '" + cfg_.kind + "'");
    }
    const double group[kDofPerGaussian] = {
        cfg.lr_position, cfg.lr_position, cfg.lr_position, cfg.lr_opacity,
        cfg.lr_scale,    cfg.lr_scale,    cfg.lr_scale,    cfg.lr_rotation,
        cfg.lr_rotation, cfg.lr_rotation, cfg.lr_rotation, cfg.lr_color,
        cfg.lr_color,    cfg.lr_color};
    const auto size = static_cast<Eigen::Index>(n * kDofPerGaussian);
    lr_.resize(size);
    for (Eigen::Index k = 0; k < size; ++k) {
        lr_[k] = group[k % kDofPerGaussian];
        if (!(lr_[k] >= 0)) throw ConfigError("learning rates must be nonnegative");
    }
    m_ = Eigen::VectorXd::Zero(size);
    v_ = Eigen::VectorXd::Zero(size);
}

void Optimizer::step(GaussianSet &g, const GaussianSet &grad) {
    Eigen::VectorXd x = g.flatten();
    const Eigen::VectorXd d = grad.flatten();
    if (x.size() != lr_.size() || d.size() != lr_.size()) {
        throw ShapeMismatch("optimizer state does not match the Gaussian set");
    }
    ++t_;
    if (cfg_.kind == "sgd") {
        x -= lr_.cwiseProduct(d);
    } else {
        m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * d;
        v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * d.cwiseProduct(d);
        const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            x[k] -= lr_[k] * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + cfg_.epsilon);
        }
    }
    g = GaussianSet::unflatten(x);
}

StepResult attack_step(GaussianSet &g, AttackProblem &problem, Optimizer &opt, std::uint64_t step) {
    const int refresh = problem.config.roi.refresh_interval;
    if (refresh > 0 && step > 0 && step % static_cast<std::uint64_t>(refresh) == 0 &&
        !problem.fixed_rois) {
        for (std::size_t v = 0; v < problem.views.size(); ++v) {
            const View &view = problem.views[v];
            const auto dets = problem.models.detector->detect(render(g, view, problem.config.render).rgb);
            problem.cache.views[v].roi = build_roi(dets, problem.config.classes,
                                                   problem.config.roi.score_min,
                                                   problem.config.roi.rho, view.width, view.height);
        }
    }
    const Evaluation ev = evaluate_objective(g, problem, step, true);
    opt.step(g, ev.grad);
    project_feasible_inplace(g);
    return {ev.losses, ev.grad.flatten().norm()};
}

std::string losses_csv_header() { return "iteration,L_det,L_dep,L_shape,L_inf,L_TV,L_HF,total"; }

std::string losses_csv_row(std::size_t iteration, const LossBreakdown &b) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", iteration,
                  b.det, b.dep, b.shape, b.linf, b.tv, b.hf, b.total);
    return buf;
}

namespace {

void write_renders(const GaussianSet &g, const AttackProblem &p, std::size_t step,
                   const std::filesystem::path &dir) {
    for (const auto &view : p.views) {
        write_png(render(g, view, p.config.render).rgb,
                  dir / "renders" / std::to_string(step) / (view.id + ".png"));
    }
}

} // namespace

RunRecord run_attack(const GaussianSet &g0, const ViewSet &views, const AttackModels &models,
                     const AttackConfig &cfg, const RunOptions &options,
                     std::optional<std::vector<ROIMask>> fixed_rois) {
    if (cfg.steps < 0) throw ConfigError("steps must be nonnegative");
    AttackProblem problem = make_problem(g0, views, models, cfg, std::move(fixed_rois));
    GaussianSet g = problem.baseline;
    Optimizer opt(cfg.optimizer, g.size());
    RunRecord record;

    std::ofstream csv;
    if (options.out_dir) {
        const auto &dir = *options.out_dir;
        std::filesystem::create_directories(dir);
        for (std::size_t v = 0; v < problem.views.size(); ++v) {
            write_mask_png(problem.cache.views[v].roi, dir / "masks" / (problem.views[v].id + ".png"));
        }
        csv.open(dir / "losses.csv");
        if (!csv) throw std::runtime_error("cannot write " + (dir / "losses.csv").string());
        csv << losses_csv_header() << "\n";
    }
    const int interval = std::max(1, options.image_interval);
    for (int k = 0; k < cfg.steps; ++k) {
        const auto step = static_cast<std::uint64_t>(k);
        if (options.out_dir && k % interval == 0) write_renders(g, problem, step, *options.out_dir);
        if (options.verbose) {
            for (std::size_t v = 0; v < problem.views.size(); ++v) {
                const auto ts = transforms_for(eot_for_run(cfg), step, v);
                for (std::size_t s = 0; s < ts.size(); ++s) {
                    const auto &p = ts[s].params();
                    std::fprintf(stderr,
                                 "step %d view %zu sample %zu: brightness %.4f contrast %.4f "
                                 "noise %.4f rot %.4f tx %.4f ty %.4f scale %.4f\n",
                                 k, v, s, p.brightness, p.contrast, p.noise_sigma, p.rotation_rad,
                                 p.tx, p.ty, p.scale);
                }
            }
        }
        const StepResult r = attack_step(g, problem, opt, step);
        record.trajectory.push_back(r.losses);
        if (csv.is_open()) csv << losses_csv_row(step, r.losses) << "\n" << std::flush;
        if (options.verbose) {
            std::fprintf(stderr, "step %d total %.6g det %.6g dep %.6g |grad| %.3g\n", k,
                         r.losses.total, r.losses.det, r.losses.dep, r.grad_norm);
        }
    }
    if (options.out_dir) {
        if (cfg.steps > 0) write_renders(g, problem, static_cast<std::size_t>(cfg.steps), *options.out_dir);
        save_gaussians(g, *options.out_dir / "final.ply", "gsattack attack run");
    }
    record.final_set = std::move(g);
    record.cache = std::move(problem.cache);
    return record;
}

} // namespace gsattack
