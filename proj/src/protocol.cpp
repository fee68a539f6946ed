#include "gsattack/protocol.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace gsattack {

std::string to_string(TransferDirection d) {
    return d == TransferDirection::DetToDepth ? "det_to_depth" : "depth_to_det";
}

TransferDirection transfer_direction_from_string(const std::string &s) {
    if (s == "det_to_depth") return TransferDirection::DetToDepth;
    if (s == "depth_to_det") return TransferDirection::DepthToDet;
    throw ConfigError("unknown transfer direction '" + s + "'");
}

void fill_grid_means(TransferGrid &grid) {
    const std::size_t rows = grid.cells.size();
    const std::size_t cols = rows ? grid.cells[0].size() : 0;
    if (rows == 0 || cols == 0) throw ShapeMismatch("transfer grid is empty");
    grid.row_means.assign(rows, 0.0);
    grid.col_means.assign(cols, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (grid.cells[r].size() != cols) throw ShapeMismatch("transfer grid is ragged");
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = grid.cells[r][c].tnr;
            grid.row_means[r] += v / double(cols);
            grid.col_means[c] += v / double(rows);
            total += v;
        }
    }
    grid.overall_mean = total / double(rows * cols);
}

TransferGrid grid_from_values(const std::vector<std::vector<double>> &values,
                              std::vector<std::string> proxies, std::vector<std::string> targets,
                              TransferDirection direction) {
    if (values.size() != proxies.size()) throw ShapeMismatch("one value row per proxy");
    TransferGrid grid;
    grid.direction = direction;
    for (std::size_t r = 0; r < values.size(); ++r) {
        if (values[r].size() != targets.size()) throw ShapeMismatch("one value per target");
        grid.cells.emplace_back();
        for (std::size_t c = 0; c < targets.size(); ++c) {
            grid.cells.back().push_back({proxies[r], targets[c], values[r][c], direction, {}});
        }
    }
    grid.proxies = std::move(proxies);
    grid.targets = std::move(targets);
    fill_grid_means(grid);
    return grid;
}

TransferGrid run_transfer_grid(const std::vector<std::shared_ptr<const Detector>> &detectors,
                               const std::vector<std::shared_ptr<const DepthEstimator>> &depths,
                               TransferDirection direction, const TransferSetup &setup) {
    if (detectors.empty() || depths.empty()) throw ConfigError("transfer grid needs models");
    std::vector<std::vector<double>> values;
    std::vector<std::vector<std::vector<ViewEval>>> records;
    std::vector<std::string> proxies, targets;
    const bool det_to_depth = direction == TransferDirection::DetToDepth;
    for (const auto &d : detectors) (det_to_depth ? proxies : targets).push_back(d->id());
    for (const auto &d : depths) (det_to_depth ? targets : proxies).push_back(d->id());

    const std::size_t n_proxy = det_to_depth ? detectors.size() : depths.size();
    for (std::size_t p = 0; p < n_proxy; ++p) {
        AttackConfig cfg = setup.base;
        AttackModels models;
        if (det_to_depth) {
            cfg.protocol = Protocol::DetOnly;
            models = {detectors[p], setup.idle_depth};
        } else {
            cfg.protocol = Protocol::DepthOnly;
            if (!setup.roi_detector) throw ConfigError("depth-only proxies need an ROI detector");
            models = {setup.roi_detector, depths[p]};
        }
        const RunRecord run = run_attack(setup.baseline, setup.views, models, cfg);
        std::vector<double> row;
        std::vector<std::vector<ViewEval>> row_records;
        if (det_to_depth) {
            const Detector &det = setup.roi_detector ? *setup.roi_detector : *detectors[p];
            for (const auto &target : depths) {
                const auto evals = evaluate_scene(run.final_set, setup.baseline, setup.views, det,
                                                  *target, setup.eval);
                row.push_back(summarize(evals, setup.eval).tnr_depth);
                row_records.push_back(evals);
            }
        } else {
            for (const auto &target : detectors) {
                const auto evals = evaluate_scene(run.final_set, setup.baseline, setup.views,
                                                  *target, *depths[p], setup.eval);
                row.push_back(summarize(evals, setup.eval).tnr_det);
                row_records.push_back(evals);
            }
        }
        values.push_back(std::move(row));
        records.push_back(std::move(row_records));
    }
    TransferGrid grid = grid_from_values(values, proxies, targets, direction);
    for (std::size_t p = 0; p < records.size(); ++p) {
        for (std::size_t t = 0; t < records[p].size(); ++t) grid.cells[p][t].evals = std::move(records[p][t]);
    }
    return grid;
}

LineFit fit_line(const std::vector<double> &x, const std::vector<double> &y) {
    if (x.size() != y.size() || x.size() < 2) throw ShapeMismatch("line fit needs >= 2 points");
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw ValueDomain("line fit needs distinct x values");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

namespace {

constexpr std::uint64_t kStreamSweep = 0x7377656570;

} // namespace

DoseResponse dose_response_sweep(const SweepSetup &setup) {
    if (setup.seeds.empty()) throw ConfigError("sweep needs at least one seed");
    const double eps = setup.base.weights.epsilon;
    DoseResponse out;
    for (int sign : setup.signs) {
        if (sign != 1 && sign != -1) throw ConfigError("sweep signs must be +1 or -1");
        for (double beta : setup.betas) {
            DoseRow row;
            row.sign = sign;
            row.beta = beta;
            row.commanded = sign * beta;
            for (std::uint64_t seed : setup.seeds) {
                std::mt19937_64 rng(derive_seed(setup.base.seed, kStreamSweep, seed));
                const double angle = std::uniform_real_distribution<double>(0.0, 360.0)(rng);
                const ViewSet views = rotate_views_about_z(setup.views, angle);
                AttackConfig cfg = setup.base;
                cfg.protocol = Protocol::DepthOnly;
                cfg.target = {sign, beta};
                cfg.seed = derive_seed(setup.base.seed, kStreamSweep, seed, 1);
                const RunRecord run = run_attack(setup.baseline, views, setup.models, cfg);
                for (std::size_t v = 0; v < views.size(); ++v) {
                    const CleanView &clean = run.cache.views[v];
                    const Image d =
                        setup.models.depth->estimate(render(run.final_set, views[v], cfg.render).rgb).values;
                    if (const auto ds = delta_sigma(d, clean.depth.values, clean.roi, eps)) {
                        row.samples.push_back(*ds);
                    }
                }
            }
            out.rows.push_back(std::move(row));
        }
    }
    return dose_from_samples(std::move(out.rows));
}

DoseResponse dose_from_samples(std::vector<DoseRow> rows) {
    DoseResponse out;
    std::vector<double> xs, ys;
    for (DoseRow &row : rows) {
        const double n = double(row.samples.size());
        if (n == 0) throw EmptyMask("no view of the sweep produced an ROI");
        row.commanded = row.sign * row.beta;
        row.mean_delta_sigma = std::accumulate(row.samples.begin(), row.samples.end(), 0.0) / n;
        double var = 0.0;
        for (double s : row.samples) var += (s - row.mean_delta_sigma) * (s - row.mean_delta_sigma);
        const double half = n > 1 ? 1.96 * std::sqrt(var / (n - 1) / n) : 0.0;
        row.ci_low = row.mean_delta_sigma - half;
        row.ci_high = row.mean_delta_sigma + half;
        xs.push_back(row.commanded);
        ys.push_back(row.mean_delta_sigma);
    }
    out.rows = std::move(rows);
    out.fit = fit_line(xs, ys);
    return out;
}

double var_eot_delta_sigma(const GaussianSet &g_adv, const ViewSet &views, const CleanCache &cache,
                           const EotConfig &cfg, const DepthEstimator &depth, double eps,
                           const RenderSettings &render_settings) {
    if (cache.views.size() != views.size()) throw ShapeMismatch("cache does not match views");
    const auto transforms = transforms_for(cfg, 0, 0);
    std::vector<Image> renders;
    for (const auto &v : views) renders.push_back(render(g_adv, v, render_settings).rgb);
    std::vector<double> per_draw;
    for (const auto &t : transforms) {
        double acc = 0.0;
        int n = 0;
        for (std::size_t v = 0; v < views.size(); ++v) {
            const CleanView &c = cache.views[v];
            const Image d = depth.estimate(t.apply(renders[v])).values;
            if (const auto ds = delta_sigma(d, c.depth.values, c.roi, eps)) {
                acc += *ds;
                ++n;
            }
        }
        if (n == 0) throw EmptyMask("no view has a nonempty ROI");
        per_draw.push_back(acc / n);
    }
    const double mean = std::accumulate(per_draw.begin(), per_draw.end(), 0.0) / double(per_draw.size());
    double var = 0.0;
    for (double x : per_draw) var += (x - mean) * (x - mean);
    return var / double(per_draw.size());
}

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::string full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string format_grid_markdown(const TransferGrid &grid) {
    std::ostringstream s;
    s << "Transfer " << to_string(grid.direction) << " (TNR, %)\n\n| proxy \\ target |";
    for (const auto &t : grid.targets) s << " " << t << " |";
    s << " row mean |\n|---|";
    for (std::size_t c = 0; c <= grid.targets.size(); ++c) s << "---|";
    s << "\n";
    for (std::size_t r = 0; r < grid.cells.size(); ++r) {
        s << "| " << grid.proxies[r] << " |";
        for (const auto &cell : grid.cells[r]) s << " " << pct(cell.tnr) << " |";
        s << " " << pct(grid.row_means[r]) << " |\n";
    }
    s << "| column mean |";
    for (double m : grid.col_means) s << " " << pct(m) << " |";
    s << " " << pct(grid.overall_mean) << " |\n";
    return s.str();
}

std::string format_grid_csv(const TransferGrid &grid) {
    std::ostringstream s;
    s << "direction,proxy,target,tnr\n";
    for (const auto &row : grid.cells)
        for (const auto &c : row)
            s << to_string(grid.direction) << "," << c.proxy << "," << c.target << "," << full(c.tnr) << "\n";
    for (std::size_t r = 0; r < grid.row_means.size(); ++r)
        s << to_string(grid.direction) << "," << grid.proxies[r] << ",row_mean," << full(grid.row_means[r]) << "\n";
    for (std::size_t c = 0; c < grid.col_means.size(); ++c)
        s << to_string(grid.direction) << ",col_mean," << grid.targets[c] << "," << full(grid.col_means[c]) << "\n";
    s << to_string(grid.direction) << ",overall,overall," << full(grid.overall_mean) << "\n";
    return s.str();
}

std::string format_dose_csv(const DoseResponse &dose) {
    std::ostringstream s;
    s << "sign,beta,commanded,mean_delta_sigma,ci_low,ci_high,samples\n";
    for (const auto &r : dose.rows) {
        s << r.sign << "," << full(r.beta) << "," << full(r.commanded) << ","
          << full(r.mean_delta_sigma) << "," << full(r.ci_low) << "," << full(r.ci_high) << ","
          << r.samples.size() << "\n";
    }
    s << "# fit slope=" << full(dose.fit.slope) << " intercept=" << full(dose.fit.intercept) << "\n";
    return s.str();
}

} // namespace gsattack
