#pragma once

// Naive scalar-loop references for the loss terms, shared by the unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "gsattack/losses.hpp"

namespace gsattack::testing {

inline ROIMask box_mask(int w, int h, int x0, int y0, int x1, int y1) {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(w) * h, 0);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m[static_cast<std::size_t>(y) * w + x] = 1;
    return ROIMask::from_mask(w, h, std::move(m));
}

inline double det_oracle(const std::vector<std::vector<double>> &p, double delta) {
    double s = 0.0;
    for (const auto &view : p) {
        double inner = 0.0;
        for (double x : view) inner += -std::log(1 - x + delta);
        s += inner / double(view.size());
    }
    return s / double(p.size());
}

inline double depth_oracle(const std::vector<Image> &res, const std::vector<ROIMask> &rois, double target) {
    double s = 0.0;
    int active = 0;
    for (std::size_t v = 0; v < res.size(); ++v) {
        double inner = 0.0;
        int n = 0;
        for (int y = 0; y < res[v].height(); ++y)
            for (int x = 0; x < res[v].width(); ++x)
                if (rois[v].contains(x, y)) {
                    inner += (res[v].at(x, y) - target) * (res[v].at(x, y) - target);
                    ++n;
                }
        if (n == 0) continue;
        s += inner / n;
        ++active;
    }
    return active ? s / active : 0.0;
}

inline double shape_oracle(const GaussianSet &g, const GaussianSet &g0, const ShapeWeights &w) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double q2 = 0.0;
        for (int k = 0; k < 3; ++k) {
            s += w.position * std::pow(g.positions[i][k] - g0.positions[i][k], 2);
            s += w.scale * std::pow(g.scales[i][k] - g0.scales[i][k], 2);
        }
        for (int k = 0; k < 4; ++k) {
            s += w.rotation * std::pow(g.rotations[i][k] - g0.rotations[i][k], 2);
            q2 += g.rotations[i][k] * g.rotations[i][k];
        }
        s += w.unit_quaternion * (q2 - 1) * (q2 - 1);
    }
    return s;
}

inline double linf_oracle(const std::vector<Vec3> &d, double budget) {
    double m = 0.0;
    for (const auto &x : d)
        for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(x[c]));
    return std::max(0.0, m - budget);
}

inline double tv_oracle(const Image &r) {
    double s = 0.0;
    for (int c = 0; c < r.channels(); ++c)
        for (int y = 0; y < r.height(); ++y)
            for (int x = 0; x < r.width(); ++x) {
                const double dx = x + 1 < r.width() ? r.at(x + 1, y, c) - r.at(x, y, c) : 0.0;
                const double dy = y + 1 < r.height() ? r.at(x, y + 1, c) - r.at(x, y, c) : 0.0;
                s += std::sqrt(dx * dx + dy * dy);
            }
    return s;
}

// Direct O(n^4) DFT per channel.
inline double hf_oracle(const Image &r) {
    double s = 0.0;
    const int w = r.width(), h = r.height();
    for (int c = 0; c < r.channels(); ++c)
        for (int ky = 0; ky < h; ++ky)
            for (int kx = 0; kx < w; ++kx) {
                std::complex<double> f = 0.0;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        f += r.at(x, y, c) * std::polar(1.0, -2 * std::numbers::pi *
                                                                 (double(kx) * x / w + double(ky) * y / h));
                s += hf_ring_weight(kx, ky, w, h) * std::abs(f);
            }
    return s;
}

} // namespace gsattack::testing
