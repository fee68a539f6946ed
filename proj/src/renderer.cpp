#include "gsattack/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include <Eigen/LU>

#include "gsattack/error.hpp"

namespace gsattack {

namespace detail {

Eigen::Matrix3d rotation_from_quaternion(const Eigen::Vector4d &q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Eigen::Vector4d rotation_vjp(const Eigen::Vector4d &q, const Eigen::Matrix3d &g) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d dw, dx, dy, dz;
    dw << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    dx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    dy << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    dz << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    return {g.cwiseProduct(dw).sum(), g.cwiseProduct(dx).sum(), g.cwiseProduct(dy).sum(),
            g.cwiseProduct(dz).sum()};
}

} // namespace detail

namespace {

constexpr int kTile = 16;

// Weight of the far plane in the normalized depth average. Pixels no splat
// reaches resolve to exactly `far`; covered pixels to the transmittance-
// weighted mean of splat centre depths.
constexpr double kFarWeight = 1e-6;

using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Screen-space footprint of one Gaussian plus what the backward pass needs.
struct Splat {
    std::size_t index = 0;
    Eigen::Vector3d cam;  // camera-space centre
    Eigen::Vector2d mean; // pixel coordinates
    Eigen::Matrix2d conic;
    Eigen::Matrix3d rot;  // R(q_unit)
    Eigen::Matrix3d cov3;
    Mat23 jac;            // projection Jacobian J
    Mat23 proj;           // J * W
    double opacity = 0.0;
    Eigen::Vector3d color;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1; // inclusive pixel bounds
};

struct Frame {
    std::vector<Splat> splats; // sorted front to back
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> tiles; // splat ids per tile, front to back
};

Frame project(const GaussianSet &g, const View &v, const RenderSettings &s) {
    v.validate();
    g.check_shape();
    const Eigen::Matrix3d w = v.rotation();
    const Eigen::Vector3d tv = v.translation();
    const double f = v.focal();
    const double cutoff = s.cutoff_sigma;

    Frame frame;
    frame.splats.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        Splat sp;
        sp.index = i;
        sp.cam = w * g.positions[i] + tv;
        const double x = sp.cam.x(), y = sp.cam.y(), z = sp.cam.z();
        if (!(z > v.near && z < v.far)) continue;
        const double qn = g.rotations[i].norm();
        if (!(qn > 0.0)) continue;

        sp.rot = detail::rotation_from_quaternion(g.rotations[i] / qn);
        const Eigen::Matrix3d m = sp.rot * g.scales[i].asDiagonal();
        sp.cov3 = m * m.transpose();
        sp.jac << f / z, 0, -f * x / (z * z), 0, f / z, -f * y / (z * z);
        sp.proj = sp.jac * w;
        Eigen::Matrix2d cov2 = sp.proj * sp.cov3 * sp.proj.transpose();
        cov2(0, 0) += s.screen_dilation;
        cov2(1, 1) += s.screen_dilation;
        const double det = cov2.determinant();
        if (!(det > 0.0)) continue;
        sp.conic = cov2.inverse();
        sp.mean = Eigen::Vector2d(f * x / z + v.cx(), f * y / z + v.cy());

        const double rx = cutoff * std::sqrt(cov2(0, 0));
        const double ry = cutoff * std::sqrt(cov2(1, 1));
        sp.x0 = std::max(0, static_cast<int>(std::ceil(sp.mean.x() - rx - 0.5)));
        sp.x1 = std::min(v.width - 1, static_cast<int>(std::floor(sp.mean.x() + rx - 0.5)));
        sp.y0 = std::max(0, static_cast<int>(std::ceil(sp.mean.y() - ry - 0.5)));
        sp.y1 = std::min(v.height - 1, static_cast<int>(std::floor(sp.mean.y() + ry - 0.5)));
        if (sp.x0 > sp.x1 || sp.y0 > sp.y1) continue;

        sp.opacity = g.opacities[i];
        sp.color = g.colors[i];
        frame.splats.push_back(std::move(sp));
    }
    std::stable_sort(frame.splats.begin(), frame.splats.end(),
                     [](const Splat &a, const Splat &b) { return a.cam.z() < b.cam.z(); });

    frame.tiles_x = (v.width + kTile - 1) / kTile;
    frame.tiles_y = (v.height + kTile - 1) / kTile;
    frame.tiles.resize(static_cast<std::size_t>(frame.tiles_x) * frame.tiles_y);
    for (int id = 0; id < static_cast<int>(frame.splats.size()); ++id) {
        const Splat &sp = frame.splats[id];
        for (int ty = sp.y0 / kTile; ty <= sp.y1 / kTile; ++ty) {
            for (int tx = sp.x0 / kTile; tx <= sp.x1 / kTile; ++tx) {
                frame.tiles[static_cast<std::size_t>(ty) * frame.tiles_x + tx].push_back(id);
            }
        }
    }
    return frame;
}

/// Falloff of splat `sp` at pixel (px, py); false outside the cutoff.
inline bool falloff(const Splat &sp, int px, int py, double cutoff2, Eigen::Vector2d &d,
                    double &gauss) {
    if (px < sp.x0 || px > sp.x1 || py < sp.y0 || py > sp.y1) return false;
    d = Eigen::Vector2d(px + 0.5, py + 0.5) - sp.mean;
    const double m2 = d.dot(sp.conic * d);
    if (m2 > cutoff2) return false;
    gauss = std::exp(-0.5 * m2);
    return true;
}

} // namespace

RenderOutput render(const GaussianSet &g, const View &v, const RenderSettings &s) {
    const Frame frame = project(g, v, s);
    const double cutoff2 = s.cutoff_sigma * s.cutoff_sigma;
    RenderOutput out{Image(v.width, v.height, 3), Image(v.width, v.height, 1),
                     Image(v.width, v.height, 1)};

    for (int py = 0; py < v.height; ++py) {
        for (int px = 0; px < v.width; ++px) {
            const auto &list =
                frame.tiles[static_cast<std::size_t>(py / kTile) * frame.tiles_x + px / kTile];
            double trans = 1.0;
            Eigen::Vector3d color = Eigen::Vector3d::Zero();
            double depth = 0.0;
            Eigen::Vector2d d;
            double gauss = 0.0;
            for (int id : list) {
                const Splat &sp = frame.splats[id];
                if (!falloff(sp, px, py, cutoff2, d, gauss)) continue;
                const double a = sp.opacity * gauss;
                color += trans * a * sp.color;
                depth += trans * a * sp.cam.z();
                trans *= 1.0 - a;
            }
            color += trans * s.background;
            depth += kFarWeight * trans * v.far;
            for (int c = 0; c < 3; ++c) out.rgb.at(px, py, c) = color[c];
            out.alpha.at(px, py) = 1.0 - trans;
            out.geo_depth.at(px, py) = depth / ((1.0 - trans) + kFarWeight * trans);
        }
    }
    return out;
}

void render_backward(const GaussianSet &g, const View &v, const RenderGrad &up,
                     GaussianSet &grad, const RenderSettings &s) {
    require_same_size(grad, g, "render_backward");
    const Frame frame = project(g, v, s);
    const double cutoff2 = s.cutoff_sigma * s.cutoff_sigma;
    const bool has_rgb = !up.rgb.empty(), has_alpha = !up.alpha.empty(),
               has_depth = !up.geo_depth.empty();
    if (has_rgb && (up.rgb.width() != v.width || up.rgb.height() != v.height)) {
        throw ShapeMismatch("render_backward: rgb gradient does not match the view");
    }

    const std::size_t n = frame.splats.size();
    std::vector<Eigen::Vector2d> g_mean(n, Eigen::Vector2d::Zero());
    std::vector<Eigen::Matrix2d> g_conic(n, Eigen::Matrix2d::Zero());
    std::vector<double> g_opacity(n, 0.0), g_depth(n, 0.0);
    std::vector<Eigen::Vector3d> g_color(n, Eigen::Vector3d::Zero());

    struct Hit {
        int id;
        double a, gauss, trans;
        Eigen::Vector2d d;
    };
    std::vector<Hit> hits;

    for (int py = 0; py < v.height; ++py) {
        for (int px = 0; px < v.width; ++px) {
            const Eigen::Vector3d gc =
                has_rgb ? Eigen::Vector3d(up.rgb.at(px, py, 0), up.rgb.at(px, py, 1),
                                          up.rgb.at(px, py, 2))
                        : Eigen::Vector3d::Zero();
            const double ga = has_alpha ? up.alpha.at(px, py) : 0.0;
            const double gd = has_depth ? up.geo_depth.at(px, py) : 0.0;
            if (gc.isZero(0.0) && ga == 0.0 && gd == 0.0) continue;

            const auto &list =
                frame.tiles[static_cast<std::size_t>(py / kTile) * frame.tiles_x + px / kTile];
            hits.clear();
            double trans = 1.0;
            double depth_num = 0.0;
            Eigen::Vector2d d;
            double gauss = 0.0;
            for (int id : list) {
                const Splat &sp = frame.splats[id];
                if (!falloff(sp, px, py, cutoff2, d, gauss)) continue;
                const double a = sp.opacity * gauss;
                hits.push_back({id, a, gauss, trans, d});
                depth_num += trans * a * sp.cam.z();
                trans *= 1.0 - a;
            }
            // geo_depth = num / den with num = sum w_i z_i + k T far and
            // den = 1 - (1 - k) T; gd_num / gd_den are the chain factors.
            depth_num += kFarWeight * trans * v.far;
            const double depth_den = (1.0 - trans) + kFarWeight * trans;
            const double gd_num = gd / depth_den;
            const double gd_den = -gd * depth_num / (depth_den * depth_den);

            // Back to front: "behind" quantities seen from just after splat i.
            Eigen::Vector3d behind_color = s.background;
            double behind_depth = kFarWeight * v.far;
            double behind_trans = 1.0;
            for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
                const Splat &sp = frame.splats[it->id];
                const double w = it->a * it->trans;
                g_color[it->id] += w * gc;
                g_depth[it->id] += w * gd_num;
                const double g_a =
                    it->trans * (gc.dot(sp.color - behind_color) +
                                 gd_num * (sp.cam.z() - behind_depth) +
                                 (ga + gd_den * (1.0 - kFarWeight)) * behind_trans);
                behind_color = it->a * sp.color + (1.0 - it->a) * behind_color;
                behind_depth = it->a * sp.cam.z() + (1.0 - it->a) * behind_depth;
                behind_trans *= 1.0 - it->a;

                g_opacity[it->id] += g_a * it->gauss;
                const double g_power = g_a * sp.opacity * it->gauss;
                g_mean[it->id] += g_power * (sp.conic * it->d);
                g_conic[it->id] += -0.5 * g_power * (it->d * it->d.transpose());
            }
        }
    }

    const Eigen::Matrix3d w = v.rotation();
    const double f = v.focal();
    for (std::size_t k = 0; k < n; ++k) {
        const Splat &sp = frame.splats[k];
        const std::size_t i = sp.index;
        const double x = sp.cam.x(), y = sp.cam.y(), z = sp.cam.z();

        grad.opacities[i] += g_opacity[k];
        grad.colors[i] += g_color[k];

        const Eigen::Matrix2d g_cov2 = -sp.conic * g_conic[k] * sp.conic;
        const Mat23 g_proj = 2.0 * g_cov2 * sp.proj * sp.cov3;
        const Eigen::Matrix3d g_cov3 = sp.proj.transpose() * g_cov2 * sp.proj;
        const Mat23 g_jac = g_proj * w.transpose();

        Eigen::Vector3d g_cam = Eigen::Vector3d::Zero();
        const double z2 = z * z, z3 = z2 * z;
        g_cam.x() += g_mean[k].x() * f / z - g_jac(0, 2) * f / z2;
        g_cam.y() += g_mean[k].y() * f / z - g_jac(1, 2) * f / z2;
        g_cam.z() += -g_mean[k].x() * f * x / z2 - g_mean[k].y() * f * y / z2 -
                     (g_jac(0, 0) + g_jac(1, 1)) * f / z2 + g_jac(0, 2) * 2.0 * f * x / z3 +
                     g_jac(1, 2) * 2.0 * f * y / z3 + g_depth[k];
        grad.positions[i] += w.transpose() * g_cam;

        const Eigen::Vector3d &scale = g.scales[i];
        const Eigen::Matrix3d m = sp.rot * scale.asDiagonal();
        const Eigen::Matrix3d g_m = 2.0 * g_cov3 * m;
        const Eigen::Matrix3d g_rot = g_m * scale.asDiagonal();
        grad.scales[i] += (g_m.cwiseProduct(sp.rot)).colwise().sum().transpose();

        const double qn = g.rotations[i].norm();
        const Eigen::Vector4d qu = g.rotations[i] / qn;
        const Eigen::Vector4d g_qu = detail::rotation_vjp(qu, g_rot);
        grad.rotations[i] += (g_qu - qu * qu.dot(g_qu)) / qn;
    }
}

std::vector<RenderOutput> render_view_set(const GaussianSet &g, const ViewSet &views,
                                          const RenderSettings &settings, bool parallel) {
    std::vector<RenderOutput> out(views.size());
    if (!parallel || views.size() < 2) {
        for (std::size_t i = 0; i < views.size(); ++i) out[i] = render(g, views[i], settings);
        return out;
    }
    std::vector<std::future<RenderOutput>> jobs;
    jobs.reserve(views.size());
    for (const auto &v : views) {
        jobs.push_back(std::async(std::launch::async, [&g, &v, &settings] {
            return render(g, v, settings);
        }));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = jobs[i].get();
    return out;
}

} // namespace gsattack
