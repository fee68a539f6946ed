#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "gsattack/cli.hpp"

namespace gsattack {

using nlohmann::json;

namespace {

void check_keys(const json &j, std::initializer_list<const char *> allowed, const std::string &where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto &item : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char *k) { return item.key() == k; })) {
            throw ConfigError("unknown key '" + where + "." + item.key() + "'");
        }
    }
}

template <class T>
void read(const json &j, const char *key, T &out, const std::string &where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception &e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void read_range(const json &j, const char *key, double &lo, double &hi, const std::string &where) {
    std::vector<double> r{lo, hi};
    read(j, key, r, where);
    if (r.size() != 2 || r[0] > r[1]) throw ConfigError(where + "." + key + " must be [lo, hi]");
    lo = r[0];
    hi = r[1];
}

const json &section(const json &j, const char *key) {
    static const json empty = json::object();
    return j.contains(key) ? j.at(key) : empty;
}

// NaN is stored as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number(const json &j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace

json to_json(const RunConfig &c) {
    const AttackConfig &a = c.attack;
    const LossWeights &w = a.weights;
    const EotConfig &e = a.eot;
    const OptimizerConfig &o = a.optimizer;
    return json{
        {"seed", c.seed},
        {"asset", c.asset},
        {"toy",
         {{"detector_seed", c.toy.detector_seed},
          {"class_id", c.toy.class_id},
          {"radius", c.toy.radius},
          {"height", c.toy.height},
          {"rows_per_band", c.toy.rows_per_band},
          {"columns", c.toy.columns},
          {"opacity", c.toy.opacity},
          {"z_offset", c.toy.z_offset}}},
        {"views",
         {{"count", c.views.count},
          {"radius", c.views.radius},
          {"elevations_deg", c.views.elevations_deg},
          {"azimuth_offset_deg", c.views.azimuth_offset_deg},
          {"fov_y", c.views.fov_y},
          {"width", c.views.width},
          {"height", c.views.height},
          {"near", c.views.near},
          {"far", c.views.far}}},
        {"adapters",
         {{"detector", c.detector}, {"depth", c.depth}, {"detectors", c.detectors}, {"depths", c.depths}}},
        {"attack",
         {{"protocol", to_string(a.protocol)},
          {"steps", a.steps},
          {"parallel", a.parallel},
          {"classes", a.classes},
          {"weights",
           {{"det", w.det},
            {"dep", w.dep},
            {"shape", w.shape},
            {"print", w.print},
            {"tv", w.tv},
            {"hf", w.hf},
            {"delta", w.delta},
            {"epsilon", w.epsilon},
            {"linf_budget", w.linf_budget},
            {"shape_terms",
             {{"position", w.shape_terms.position},
              {"scale", w.shape_terms.scale},
              {"rotation", w.shape_terms.rotation},
              {"unit_quaternion", w.shape_terms.unit_quaternion}}}}},
          {"target", {{"sign", a.target.sign}, {"beta", a.target.beta}}},
          {"eot",
           {{"mode", to_string(e.mode)},
            {"samples", e.samples},
            {"brightness", {e.brightness_min, e.brightness_max}},
            {"contrast", {e.contrast_min, e.contrast_max}},
            {"noise_sigma_max", e.noise_sigma_max},
            {"rotation_deg", e.rotation_deg},
            {"translation_frac", e.translation_frac},
            {"scale", {e.scale_min, e.scale_max}}}},
          {"optimizer",
           {{"kind", o.kind},
            {"lr",
             {{"position", o.lr_position},
              {"opacity", o.lr_opacity},
              {"scale", o.lr_scale},
              {"rotation", o.lr_rotation},
              {"color", o.lr_color}}},
            {"beta1", o.beta1},
            {"beta2", o.beta2},
            {"epsilon", o.epsilon}}},
          {"roi", {{"rho", a.roi.rho}, {"score_min", a.roi.score_min}, {"refresh_interval", a.roi.refresh_interval}}},
          {"render",
           {{"background", {a.render.background[0], a.render.background[1], a.render.background[2]}},
            {"screen_dilation", a.render.screen_dilation},
            {"cutoff_sigma", a.render.cutoff_sigma}}}}},
        {"transfer", {{"direction", to_string(c.direction)}}},
        {"sweep", {{"betas", c.betas}, {"signs", c.signs}, {"seeds", c.sweep_seeds}}},
        {"eval", {{"gt_class", c.gt_class}, {"rho", c.eval_rho}}},
        {"output", {{"dir", c.out_dir}, {"image_interval", c.image_interval}, {"verbose", c.verbose}}},
    };
}

RunConfig run_config_from_json(const json &j) {
    RunConfig c;
    check_keys(j, {"seed", "asset", "toy", "views", "adapters", "attack", "transfer", "sweep", "eval", "output"},
               "config");
    read(j, "seed", c.seed, "config");
    read(j, "asset", c.asset, "config");

    const json &toy = section(j, "toy");
    check_keys(toy, {"detector_seed", "class_id", "radius", "height", "rows_per_band", "columns", "opacity", "z_offset"},
               "toy");
    read(toy, "detector_seed", c.toy.detector_seed, "toy");
    read(toy, "class_id", c.toy.class_id, "toy");
    read(toy, "radius", c.toy.radius, "toy");
    read(toy, "height", c.toy.height, "toy");
    read(toy, "rows_per_band", c.toy.rows_per_band, "toy");
    read(toy, "columns", c.toy.columns, "toy");
    read(toy, "opacity", c.toy.opacity, "toy");
    read(toy, "z_offset", c.toy.z_offset, "toy");

    const json &v = section(j, "views");
    check_keys(v, {"count", "radius", "elevations_deg", "azimuth_offset_deg", "fov_y", "width", "height", "near", "far"},
               "views");
    read(v, "count", c.views.count, "views");
    read(v, "radius", c.views.radius, "views");
    read(v, "elevations_deg", c.views.elevations_deg, "views");
    read(v, "azimuth_offset_deg", c.views.azimuth_offset_deg, "views");
    read(v, "fov_y", c.views.fov_y, "views");
    read(v, "width", c.views.width, "views");
    read(v, "height", c.views.height, "views");
    read(v, "near", c.views.near, "views");
    read(v, "far", c.views.far, "views");

    const json &ad = section(j, "adapters");
    check_keys(ad, {"detector", "depth", "detectors", "depths"}, "adapters");
    read(ad, "detector", c.detector, "adapters");
    read(ad, "depth", c.depth, "adapters");
    read(ad, "detectors", c.detectors, "adapters");
    read(ad, "depths", c.depths, "adapters");

    const json &at = section(j, "attack");
    check_keys(at, {"protocol", "steps", "parallel", "classes", "weights", "target", "eot", "optimizer", "roi", "render"},
               "attack");
    AttackConfig &a = c.attack;
    std::string protocol = to_string(a.protocol);
    read(at, "protocol", protocol, "attack");
    a.protocol = protocol_from_string(protocol);
    read(at, "steps", a.steps, "attack");
    read(at, "parallel", a.parallel, "attack");
    read(at, "classes", a.classes, "attack");

    const json &w = section(at, "weights");
    check_keys(w, {"det", "dep", "shape", "print", "tv", "hf", "delta", "epsilon", "linf_budget", "shape_terms"},
               "attack.weights");
    const std::string ws = "attack.weights";
    read(w, "det", a.weights.det, ws);
    read(w, "dep", a.weights.dep, ws);
    read(w, "shape", a.weights.shape, ws);
    read(w, "print", a.weights.print, ws);
    read(w, "tv", a.weights.tv, ws);
    read(w, "hf", a.weights.hf, ws);
    read(w, "delta", a.weights.delta, ws);
    read(w, "epsilon", a.weights.epsilon, ws);
    read(w, "linf_budget", a.weights.linf_budget, ws);
    const json &st = section(w, "shape_terms");
    check_keys(st, {"position", "scale", "rotation", "unit_quaternion"}, ws + ".shape_terms");
    read(st, "position", a.weights.shape_terms.position, ws);
    read(st, "scale", a.weights.shape_terms.scale, ws);
    read(st, "rotation", a.weights.shape_terms.rotation, ws);
    read(st, "unit_quaternion", a.weights.shape_terms.unit_quaternion, ws);

    const json &t = section(at, "target");
    check_keys(t, {"sign", "beta"}, "attack.target");
    read(t, "sign", a.target.sign, "attack.target");
    read(t, "beta", a.target.beta, "attack.target");
    if (a.target.sign != 1 && a.target.sign != -1) throw ConfigError("attack.target.sign must be +1 or -1");
    if (!(a.target.beta >= 0)) throw ConfigError("attack.target.beta must be nonnegative");

    const json &e = section(at, "eot");
    check_keys(e, {"mode", "samples", "brightness", "contrast", "noise_sigma_max", "rotation_deg", "translation_frac", "scale"},
               "attack.eot");
    std::string mode = to_string(a.eot.mode);
    read(e, "mode", mode, "attack.eot");
    a.eot.mode = eot_mode_from_string(mode);
    read(e, "samples", a.eot.samples, "attack.eot");
    if (a.eot.samples < 1) throw ConfigError("attack.eot.samples must be >= 1");
    read_range(e, "brightness", a.eot.brightness_min, a.eot.brightness_max, "attack.eot");
    read_range(e, "contrast", a.eot.contrast_min, a.eot.contrast_max, "attack.eot");
    read(e, "noise_sigma_max", a.eot.noise_sigma_max, "attack.eot");
    read(e, "rotation_deg", a.eot.rotation_deg, "attack.eot");
    read(e, "translation_frac", a.eot.translation_frac, "attack.eot");
    read_range(e, "scale", a.eot.scale_min, a.eot.scale_max, "attack.eot");

    const json &o = section(at, "optimizer");
    check_keys(o, {"kind", "lr", "beta1", "beta2", "epsilon"}, "attack.optimizer");
    read(o, "kind", a.optimizer.kind, "attack.optimizer");
    if (a.optimizer.kind != "adam" && a.optimizer.kind != "sgd") {
        throw ConfigError("attack.optimizer.kind must be adam or sgd");
    }
    const json &lr = section(o, "lr");
    check_keys(lr, {"position", "opacity", "scale", "rotation", "color"}, "attack.optimizer.lr");
    read(lr, "position", a.optimizer.lr_position, "attack.optimizer.lr");
    read(lr, "opacity", a.optimizer.lr_opacity, "attack.optimizer.lr");
    read(lr, "scale", a.optimizer.lr_scale, "attack.optimizer.lr");
    read(lr, "rotation", a.optimizer.lr_rotation, "attack.optimizer.lr");
    read(lr, "color", a.optimizer.lr_color, "attack.optimizer.lr");
    read(o, "beta1", a.optimizer.beta1, "attack.optimizer");
    read(o, "beta2", a.optimizer.beta2, "attack.optimizer");
    read(o, "epsilon", a.optimizer.epsilon, "attack.optimizer");

    const json &r = section(at, "roi");
    check_keys(r, {"rho", "score_min", "refresh_interval"}, "attack.roi");
    read(r, "rho", a.roi.rho, "attack.roi");
    read(r, "score_min", a.roi.score_min, "attack.roi");
    read(r, "refresh_interval", a.roi.refresh_interval, "attack.roi");
    if (!(a.roi.rho > 0 && a.roi.rho <= 1)) throw ConfigError("attack.roi.rho must lie in (0, 1]");

    const json &rs = section(at, "render");
    check_keys(rs, {"background", "screen_dilation", "cutoff_sigma"}, "attack.render");
    std::vector<double> bg{a.render.background[0], a.render.background[1], a.render.background[2]};
    read(rs, "background", bg, "attack.render");
    if (bg.size() != 3) throw ConfigError("attack.render.background must have 3 entries");
    a.render.background = Eigen::Vector3d(bg[0], bg[1], bg[2]);
    read(rs, "screen_dilation", a.render.screen_dilation, "attack.render");
    read(rs, "cutoff_sigma", a.render.cutoff_sigma, "attack.render");

    const json &tr = section(j, "transfer");
    check_keys(tr, {"direction"}, "transfer");
    std::string direction = to_string(c.direction);
    read(tr, "direction", direction, "transfer");
    c.direction = transfer_direction_from_string(direction);

    const json &sw = section(j, "sweep");
    check_keys(sw, {"betas", "signs", "seeds"}, "sweep");
    read(sw, "betas", c.betas, "sweep");
    read(sw, "signs", c.signs, "sweep");
    read(sw, "seeds", c.sweep_seeds, "sweep");

    const json &ev = section(j, "eval");
    check_keys(ev, {"gt_class", "rho"}, "eval");
    read(ev, "gt_class", c.gt_class, "eval");
    read(ev, "rho", c.eval_rho, "eval");

    const json &out = section(j, "output");
    check_keys(out, {"dir", "image_interval", "verbose"}, "output");
    read(out, "dir", c.out_dir, "output");
    read(out, "image_interval", c.image_interval, "output");
    read(out, "verbose", c.verbose, "output");

    c.attack.weights.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return run_config_from_json(json::parse(in));
    } catch (const json::parse_error &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

AttackConfig attack_config(const RunConfig &cfg) {
    AttackConfig a = cfg.attack;
    a.seed = cfg.seed;
    return a;
}

EvalSettings eval_settings(const RunConfig &cfg) {
    EvalSettings e;
    e.classes = cfg.attack.classes;
    e.gt_class = cfg.gt_class;
    e.epsilon = cfg.attack.weights.epsilon;
    e.sign = cfg.attack.target.sign;
    e.render = cfg.attack.render;
    e.mask_rho = cfg.eval_rho;
    return e;
}

GaussianSet load_asset(const RunConfig &cfg) {
    if (cfg.asset == "toy") return make_toy_vehicle(cfg.toy);
    if (!std::filesystem::exists(cfg.asset)) throw MalformedAsset("asset not found: " + cfg.asset);
    return load_gaussians(cfg.asset);
}

namespace {

json box_json(const Box &b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }
Box box_from(const json &j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

json dets_json(const std::vector<Detection> &dets) {
    json out = json::array();
    for (const auto &d : dets) {
        out.push_back({{"box", box_json(d.box)}, {"class", d.class_id}, {"score", d.score}, {"anchor", d.anchor}});
    }
    return out;
}

std::vector<Detection> dets_from(const json &j) {
    std::vector<Detection> out;
    for (const auto &d : j) {
        out.push_back({box_from(d.at("box")), d.at("class").get<std::string>(), d.at("score").get<double>(),
                       d.at("anchor").get<int>()});
    }
    return out;
}

json errors_json(const DepthErrors &e) {
    return {{"absrel", number(e.absrel)}, {"rmse", number(e.rmse)}, {"rmse_log", number(e.rmse_log)}};
}

DepthErrors errors_from(const json &j) {
    return {number(j.at("absrel")), number(j.at("rmse")), number(j.at("rmse_log"))};
}

json bundle_json(const MetricBundle &b) {
    json per_view = json::array();
    for (double d : b.delta_sigma_per_view) per_view.push_back(number(d));
    return {{"map50", number(b.map50)},
            {"absrel", number(b.absrel)},
            {"rmse", number(b.rmse)},
            {"rmse_log", number(b.rmse_log)},
            {"delta_sigma_mean", number(b.delta_sigma_mean)},
            {"delta_sigma_per_view", per_view},
            {"sign_agreement", number(b.sign_agreement)},
            {"mean_confidence", number(b.mean_confidence)}};
}

} // namespace

json to_json(const ViewEval &v) {
    return {{"view_id", v.view_id},
            {"gt_box", v.gt_box ? box_json(*v.gt_box) : json(nullptr)},
            {"clean_detections", dets_json(v.clean_detections)},
            {"adv_detections", dets_json(v.adv_detections)},
            {"clean_confidence", v.clean_confidence},
            {"adv_confidence", v.adv_confidence},
            {"mask_empty", v.mask_empty},
            {"clean_errors", errors_json(v.clean_errors)},
            {"adv_errors", errors_json(v.adv_errors)},
            {"delta_sigma", number(v.delta_sigma)}};
}

ViewEval view_eval_from_json(const json &j) {
    ViewEval v;
    v.view_id = j.at("view_id").get<std::string>();
    if (!j.at("gt_box").is_null()) v.gt_box = box_from(j.at("gt_box"));
    v.clean_detections = dets_from(j.at("clean_detections"));
    v.adv_detections = dets_from(j.at("adv_detections"));
    v.clean_confidence = j.at("clean_confidence").get<double>();
    v.adv_confidence = j.at("adv_confidence").get<double>();
    v.mask_empty = j.at("mask_empty").get<bool>();
    v.clean_errors = errors_from(j.at("clean_errors"));
    v.adv_errors = errors_from(j.at("adv_errors"));
    v.delta_sigma = number(j.at("delta_sigma"));
    return v;
}

json to_json(const EvalSummary &s) {
    return {{"clean", bundle_json(s.clean)},
            {"adv", bundle_json(s.adv)},
            {"tnr_det", number(s.tnr_det)},
            {"tnr_depth", number(s.tnr_depth)}};
}

} // namespace gsattack
