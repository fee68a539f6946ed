#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gsattack/cli.hpp"
#include "gsattack/io.hpp"

namespace gsattack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kReportTolerance = 1e-9;

int exit_code(const Error &e) {
    const std::string &k = e.kind();
    if (k == "ConfigError") return 2;
    if (k == "MalformedAsset" || k == "ValueDomain") return 3;
    if (k == "AdapterFailure") return 4;
    if (k == "NonFiniteLoss") return 5;
    return 1;
}

template <class F>
int guarded(F &&body) {
    try {
        return body();
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

json view_json(const View &v) {
    json m = json::array();
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m.push_back(v.world_to_camera(r, c));
    }
    return {{"id", v.id},   {"world_to_camera", m}, {"fov_y", v.fov_y}, {"near", v.near},
            {"far", v.far}, {"width", v.width},     {"height", v.height}};
}

json views_json(const ViewSet &views) {
    json out = json::array();
    for (const auto &v : views) out.push_back(view_json(v));
    return out;
}

json evals_json(const std::vector<ViewEval> &evals) {
    json out = json::array();
    for (const auto &e : evals) out.push_back(to_json(e));
    return out;
}

std::vector<ViewEval> evals_from(const json &j) {
    std::vector<ViewEval> out;
    for (const auto &e : j) out.push_back(view_eval_from_json(e));
    return out;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json grid_json(const TransferGrid &g) {
    json cells = json::array();
    for (const auto &row : g.cells) {
        json r = json::array();
        for (const auto &c : row) {
            r.push_back({{"proxy", c.proxy}, {"target", c.target}, {"tnr", number(c.tnr)}, {"per_view", evals_json(c.evals)}});
        }
        cells.push_back(r);
    }
    json rows = json::array(), cols = json::array();
    for (double v : g.row_means) rows.push_back(number(v));
    for (double v : g.col_means) cols.push_back(number(v));
    return {{"direction", to_string(g.direction)},
            {"proxies", g.proxies},
            {"targets", g.targets},
            {"cells", cells},
            {"row_means", rows},
            {"col_means", cols},
            {"overall_mean", number(g.overall_mean)}};
}

json dose_json(const DoseResponse &d) {
    json rows = json::array();
    for (const auto &r : d.rows) {
        rows.push_back({{"sign", r.sign},
                        {"beta", r.beta},
                        {"commanded", r.commanded},
                        {"mean_delta_sigma", r.mean_delta_sigma},
                        {"ci_low", r.ci_low},
                        {"ci_high", r.ci_high},
                        {"samples", r.samples}});
    }
    return {{"rows", rows}, {"fit", {{"slope", d.fit.slope}, {"intercept", d.fit.intercept}}}};
}

// Equality of two manifests' numbers up to `tol`; other leaves must match exactly.
bool close(const json &a, const json &b, double tol, const std::string &where, std::string &diff) {
    if (a.is_number() && b.is_number()) {
        const double x = a.get<double>(), y = b.get<double>();
        if (std::abs(x - y) <= tol * std::max(1.0, std::abs(y))) return true;
        diff = where + ": " + a.dump() + " vs " + b.dump();
        return false;
    }
    if (a.type() != b.type()) {
        diff = where + ": " + a.dump() + " vs " + b.dump();
        return false;
    }
    if (a.is_object()) {
        if (a.size() != b.size()) {
            diff = where + ": key sets differ";
            return false;
        }
        for (const auto &item : a.items()) {
            if (!b.contains(item.key())) {
                diff = where + "." + item.key() + ": missing";
                return false;
            }
            if (!close(item.value(), b.at(item.key()), tol, where + "." + item.key(), diff)) return false;
        }
        return true;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) {
            diff = where + ": lengths differ";
            return false;
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!close(a[i], b[i], tol, where + "[" + std::to_string(i) + "]", diff)) return false;
        }
        return true;
    }
    if (a != b) {
        diff = where + ": " + a.dump() + " vs " + b.dump();
        return false;
    }
    return true;
}

void write_json(const fs::path &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path &path) {
    if (!fs::exists(path)) throw MalformedAsset("missing " + path.string());
    try {
        return json::parse(read_text(path));
    } catch (const json::exception &e) {
        throw MalformedAsset(path.string() + ": " + e.what());
    }
}

// Writes the snapshot before anything stochastic happens.
fs::path begin_run(const RunConfig &cfg) {
    const fs::path dir = cfg.out_dir;
    fs::create_directories(dir);
    write_json(dir / "config.snapshot", to_json(cfg));
    return dir;
}

json base_manifest(const char *kind, const RunConfig &cfg, const ViewSet &views) {
    return {{"kind", kind},
            {"seeds", {{"root", cfg.seed}}},
            {"asset", cfg.asset},
            {"views", views_json(views)}};
}

std::vector<ROIMask> evaluation_masks(const GaussianSet &g0, const ViewSet &views, const RunConfig &cfg) {
    std::vector<ROIMask> masks;
    for (const auto &v : views) masks.push_back(ground_truth_mask(render(g0, v, cfg.attack.render).alpha, cfg.eval_rho));
    return masks;
}

std::string fmt(double v, const char *spec = "%.4f") {
    if (!std::isfinite(v)) return "n/a";
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

struct Rebuilt {
    json numbers;
    std::string table;
};

Rebuilt rebuild_attack(const fs::path &dir, const RunConfig &cfg, const json &manifest) {
    const auto evals = evals_from(manifest.at("per_view"));
    const EvalSummary s = summarize(evals, eval_settings(cfg));
    const double side = side_delta(load_gaussians(dir / "final.ply"), load_gaussians(dir / "baseline.ply"));
    std::ostringstream t;
    t << "| " << dir.string() << " | " << to_string(cfg.attack.protocol) << " | " << fmt(s.clean.mean_confidence)
      << " | " << fmt(s.adv.mean_confidence) << " | " << fmt(100 * s.tnr_det, "%.2f") << " | "
      << fmt(100 * s.tnr_depth, "%.2f") << " | " << fmt(s.adv.delta_sigma_mean) << " | " << fmt(1e3 * side, "%.3f")
      << " |\n";
    return {{{"summary", to_json(s)}, {"side_delta", side}}, t.str()};
}

Rebuilt rebuild_transfer(const RunConfig &cfg, const json &manifest) {
    const json &g = manifest.at("grid");
    const EvalSettings settings = eval_settings(cfg);
    const TransferDirection dir = transfer_direction_from_string(g.at("direction").get<std::string>());
    std::vector<std::vector<double>> values;
    std::vector<std::vector<std::vector<ViewEval>>> records;
    for (const auto &row : g.at("cells")) {
        values.emplace_back();
        records.emplace_back();
        for (const auto &cell : row) {
            auto evals = evals_from(cell.at("per_view"));
            const EvalSummary s = summarize(evals, settings);
            values.back().push_back(dir == TransferDirection::DetToDepth ? s.tnr_depth : s.tnr_det);
            records.back().push_back(std::move(evals));
        }
    }
    TransferGrid grid = grid_from_values(values, g.at("proxies").get<std::vector<std::string>>(),
                                         g.at("targets").get<std::vector<std::string>>(), dir);
    for (std::size_t p = 0; p < records.size(); ++p) {
        for (std::size_t t = 0; t < records[p].size(); ++t) grid.cells[p][t].evals = std::move(records[p][t]);
    }
    return {{{"grid", grid_json(grid)}}, format_grid_markdown(grid)};
}

Rebuilt rebuild_sweep(const json &manifest) {
    std::vector<DoseRow> rows;
    for (const auto &r : manifest.at("dose").at("rows")) {
        DoseRow row;
        row.sign = r.at("sign").get<int>();
        row.beta = r.at("beta").get<double>();
        row.samples = r.at("samples").get<std::vector<double>>();
        rows.push_back(std::move(row));
    }
    const DoseResponse dose = dose_from_samples(std::move(rows));
    return {{{"dose", dose_json(dose)}}, format_dose_csv(dose)};
}

Rebuilt rebuild_render(const RunConfig &cfg, const json &manifest) {
    const auto evals = evals_from(manifest.at("per_view"));
    const EvalSummary s = summarize(evals, eval_settings(cfg));
    std::ostringstream t;
    t << "clean mAP@0.5 " << fmt(s.clean.map50) << ", AbsRel " << fmt(s.clean.absrel) << ", RMSE "
      << fmt(s.clean.rmse) << ", mean confidence " << fmt(s.clean.mean_confidence) << "\n";
    return {{{"clean", to_json(s)["clean"]}}, t.str()};
}

} // namespace

int cmd_attack(const RunConfig &cfg) {
    return guarded([&] {
        const fs::path dir = begin_run(cfg);
        const GaussianSet g0 = load_asset(cfg);
        const ViewSet views = make_orbit_views(cfg.views);
        const AttackModels models{make_detector(cfg.detector), make_depth_estimator(cfg.depth)};
        const AttackConfig acfg = attack_config(cfg);
        save_gaussians(g0, dir / "baseline.ply");

        RunOptions opts;
        opts.out_dir = dir;
        opts.image_interval = cfg.image_interval;
        opts.verbose = cfg.verbose;
        const RunRecord run = run_attack(g0, views, models, acfg, opts);

        const EvalSettings settings = eval_settings(cfg);
        const auto masks = evaluation_masks(g0, views, cfg);
        const auto evals = evaluate_scene(run.final_set, g0, views, *models.detector, *models.depth, settings, masks);
        const EvalSummary summary = summarize(evals, settings);
        const double side = side_delta(load_gaussians(dir / "final.ply"), load_gaussians(dir / "baseline.ply"));

        json manifest = base_manifest("attack", cfg, views);
        manifest["seeds"]["eot"] = acfg.seed;
        manifest["adapters"] = {{"detector", models.detector->id()}, {"depth", models.depth->id()}};
        manifest["steps"] = run.trajectory.size();
        manifest["per_view"] = evals_json(evals);
        manifest["summary"] = to_json(summary);
        manifest["side_delta"] = side;
        json conf = json::array();
        for (const auto &e : evals) conf.push_back({{"view", e.view_id}, {"clean", e.clean_confidence}, {"adv", e.adv_confidence}});
        manifest["final_confidences"] = conf;
        write_json(dir / "manifest.json", manifest);
        std::cout << "attack finished: " << run.trajectory.size() << " steps, Side-delta x1e3 "
                  << fmt(1e3 * side, "%.3f") << ", run directory " << dir.string() << "\n";
        return 0;
    });
}

int cmd_transfer(const RunConfig &cfg) {
    return guarded([&] {
        const fs::path dir = begin_run(cfg);
        TransferSetup setup;
        setup.baseline = load_asset(cfg);
        setup.views = make_orbit_views(cfg.views);
        setup.base = attack_config(cfg);
        setup.roi_detector = make_detector(cfg.detector);
        setup.idle_depth = make_depth_estimator(cfg.depth);
        setup.eval = eval_settings(cfg);
        std::vector<std::shared_ptr<const Detector>> dets;
        std::vector<std::shared_ptr<const DepthEstimator>> depths;
        for (const auto &s : cfg.detectors) dets.push_back(make_detector(s));
        for (const auto &s : cfg.depths) depths.push_back(make_depth_estimator(s));

        const TransferGrid grid = run_transfer_grid(dets, depths, cfg.direction, setup);
        write_text(dir / "grid.md", format_grid_markdown(grid));
        write_text(dir / "grid.csv", format_grid_csv(grid));
        json manifest = base_manifest("transfer", cfg, setup.views);
        manifest["adapters"] = {{"detectors", cfg.detectors}, {"depths", cfg.depths}, {"roi_detector", setup.roi_detector->id()}};
        manifest["grid"] = grid_json(grid);
        write_json(dir / "manifest.json", manifest);
        std::cout << format_grid_markdown(grid);
        return 0;
    });
}

int cmd_sweep(const RunConfig &cfg) {
    return guarded([&] {
        const fs::path dir = begin_run(cfg);
        SweepSetup setup;
        setup.baseline = load_asset(cfg);
        setup.views = make_orbit_views(cfg.views);
        setup.base = attack_config(cfg);
        setup.models = {make_detector(cfg.detector), make_depth_estimator(cfg.depth)};
        setup.betas = cfg.betas;
        setup.signs = cfg.signs;
        setup.seeds = cfg.sweep_seeds;

        const DoseResponse dose = dose_response_sweep(setup);
        write_text(dir / "dose.csv", format_dose_csv(dose));
        json manifest = base_manifest("sweep", cfg, setup.views);
        manifest["seeds"]["sweep"] = cfg.sweep_seeds;
        manifest["adapters"] = {{"detector", setup.models.detector->id()}, {"depth", setup.models.depth->id()}};
        manifest["dose"] = dose_json(dose);
        write_json(dir / "manifest.json", manifest);
        std::cout << format_dose_csv(dose) << "fit slope " << fmt(dose.fit.slope) << ", intercept "
                  << fmt(dose.fit.intercept, "%.5f") << "\n";
        return 0;
    });
}

int cmd_render(const RunConfig &cfg) {
    return guarded([&] {
        const fs::path dir = begin_run(cfg);
        const GaussianSet g0 = load_asset(cfg);
        const ViewSet views = make_orbit_views(cfg.views);
        const auto det = make_detector(cfg.detector);
        const auto depth = make_depth_estimator(cfg.depth);
        for (const auto &v : views) {
            const RenderOutput out = render(g0, v, cfg.attack.render);
            write_png(out.rgb, dir / "renders" / (v.id + ".png"));
            write_pfm(out.alpha, dir / "renders" / (v.id + "_alpha.pfm"));
            write_pfm(out.geo_depth, dir / "renders" / (v.id + "_depth.pfm"));
        }
        const EvalSettings settings = eval_settings(cfg);
        const auto evals = evaluate_scene(g0, g0, views, *det, *depth, settings, evaluation_masks(g0, views, cfg));
        json manifest = base_manifest("render", cfg, views);
        manifest["adapters"] = {{"detector", det->id()}, {"depth", depth->id()}};
        manifest["per_view"] = evals_json(evals);
        manifest["clean"] = to_json(summarize(evals, settings))["clean"];
        write_json(dir / "manifest.json", manifest);
        std::cout << rebuild_render(cfg, manifest).table;
        return 0;
    });
}

int cmd_report(const std::vector<fs::path> &run_dirs, std::ostream &out) {
    return guarded([&] {
        if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
        bool attack_header = false;
        int mismatches = 0;
        for (const auto &dir : run_dirs) {
            const json manifest = read_json(dir / "manifest.json");
            const RunConfig cfg = run_config_from_json(read_json(dir / "config.snapshot"));
            const std::string kind = manifest.at("kind").get<std::string>();
            Rebuilt r;
            if (kind == "attack") {
                r = rebuild_attack(dir, cfg, manifest);
                if (!attack_header) {
                    out << "| run | protocol | conf clean | conf adv | TNR_det % | TNR_depth % | delta-sigma | "
                           "Side-delta x1e3 |\n|---|---|---|---|---|---|---|---|\n";
                    attack_header = true;
                }
            } else if (kind == "transfer") {
                r = rebuild_transfer(cfg, manifest);
                out << "\n" << dir.string() << "\n";
            } else if (kind == "sweep") {
                r = rebuild_sweep(manifest);
                out << "\n" << dir.string() << "\n";
            } else if (kind == "render") {
                r = rebuild_render(cfg, manifest);
                out << dir.string() << ": ";
            } else {
                throw MalformedAsset(dir.string() + ": unknown run kind '" + kind + "'");
            }
            out << r.table;
            for (const auto &item : r.numbers.items()) {
                std::string diff;
                if (!close(item.value(), manifest.at(item.key()), kReportTolerance, item.key(), diff)) {
                    std::cerr << "error: " << dir.string() << ": rebuilt " << diff << "\n";
                    ++mismatches;
                }
            }
        }
        return mismatches == 0 ? 0 : 1;
    });
}

int run_cli(int argc, char **argv) {
    CLI::App app{"Adversarial 3D Gaussian attacks on detection and depth"};
    app.require_subcommand(1);

    std::string config_path, out_dir, asset;
    std::optional<std::uint64_t> seed;
    std::optional<int> views, steps;
    bool verbose = false;
    auto add_run_flags = [&](CLI::App *sub) {
        sub->add_option("--config", config_path, "JSON run configuration (defaults when omitted)");
        sub->add_option("--out", out_dir, "run directory");
        sub->add_option("--seed", seed, "root seed");
        sub->add_option("--views", views, "number of orbit views");
        sub->add_option("--steps", steps, "attack steps");
        sub->add_option("--asset", asset, "PLY path or 'toy'");
        sub->add_flag("--verbose", verbose, "per-step logs on stderr");
    };
    CLI::App *attack = app.add_subcommand("attack", "run one attack and write a run directory");
    CLI::App *transfer = app.add_subcommand("transfer", "cross-task transfer grid");
    CLI::App *sweep = app.add_subcommand("sweep", "depth dose-response sweep");
    CLI::App *rend = app.add_subcommand("render", "clean renders and metrics");
    for (CLI::App *sub : {attack, transfer, sweep, rend}) add_run_flags(sub);

    CLI::App *report = app.add_subcommand("report", "rebuild summary tables from run directories");
    std::vector<std::string> report_dirs;
    report->add_option("dirs", report_dirs, "run directories");

    CLI::App *toy = app.add_subcommand("toy", "write the built-in toy asset as PLY");
    std::string toy_path = "toy.ply";
    toy->add_option("path", toy_path, "output PLY");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    if (report->parsed()) {
        return cmd_report(std::vector<fs::path>(report_dirs.begin(), report_dirs.end()), std::cout);
    }
    if (toy->parsed()) {
        return guarded([&] {
            save_gaussians(make_toy_vehicle(), toy_path);
            return 0;
        });
    }

    RunConfig cfg;
    const int loaded = guarded([&] {
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!asset.empty()) cfg.asset = asset;
        if (seed) cfg.seed = *seed;
        if (views) {
            if (*views < 1) throw ConfigError("--views must be >= 1");
            cfg.views.count = *views;
        }
        if (steps) {
            if (*steps < 0) throw ConfigError("--steps must be >= 0");
            cfg.attack.steps = *steps;
        }
        if (verbose) cfg.verbose = true;
        return 0;
    });
    if (loaded != 0) return loaded;

    if (attack->parsed()) return cmd_attack(cfg);
    if (transfer->parsed()) return cmd_transfer(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    return cmd_render(cfg);
}

} // namespace gsattack
