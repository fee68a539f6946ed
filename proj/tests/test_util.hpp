#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Core>

#include "gsattack/gaussians.hpp"
#include "gsattack/image.hpp"

namespace gsattack::testing {

/// Random in-domain Gaussian set clustered around the origin.
inline GaussianSet random_gaussians(std::size_t n, std::uint64_t seed, double spread = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GaussianSet g(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.positions[i] = Vec3(spread * (2 * u(rng) - 1), spread * (2 * u(rng) - 1),
                              spread * (2 * u(rng) - 1));
        g.opacities[i] = 0.3 + 0.6 * u(rng);
        g.scales[i] = Vec3(0.1 + 0.2 * u(rng), 0.1 + 0.2 * u(rng), 0.1 + 0.2 * u(rng));
        g.rotations[i] = Vec4(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
        g.colors[i] = Vec3(0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng), 0.1 + 0.8 * u(rng));
    }
    return g;
}

inline Image random_image(int w, int h, int c, std::uint64_t seed, double lo = 0.0,
                          double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h, c);
    for (auto &v : img.values()) v = u(rng);
    return img;
}

/// Central finite difference of f over the flattened N x 14 parameters.
inline Eigen::VectorXd numeric_gradient(const GaussianSet &g,
                                        const std::function<double(const GaussianSet &)> &f,
                                        const std::function<double(int)> &step_for_dof) {
    const Eigen::VectorXd x0 = g.flatten();
    Eigen::VectorXd out(x0.size());
    for (Eigen::Index k = 0; k < x0.size(); ++k) {
        const double h = step_for_dof(static_cast<int>(k % kDofPerGaussian));
        Eigen::VectorXd xp = x0, xm = x0;
        xp[k] += h;
        xm[k] -= h;
        out[k] = (f(GaussianSet::unflatten(xp)) - f(GaussianSet::unflatten(xm))) / (2 * h);
    }
    return out;
}

/// Largest relative error |a - n| / max(|a|, |n|, floor), where floor is a
/// tiny fraction of the numeric gradient's scale so that entries that are
/// zero in both do not dominate.
inline double max_relative_error(const Eigen::VectorXd &analytic, const Eigen::VectorXd &numeric,
                                 double floor_fraction = 1e-6) {
    const double floor = std::max(floor_fraction * numeric.cwiseAbs().maxCoeff(), 1e-12);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < analytic.size(); ++k) {
        const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
        worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / denom);
    }
    return worst;
}

/// Finite-difference step per DoF: 1e-4 for position/scale/color, 1e-5 for
/// opacity and rotation.
inline double render_fd_step(int dof_index) {
    if (dof_index == dof::kOpacity) return 1e-5;
    if (dof_index >= dof::kRotation && dof_index < dof::kColor) return 1e-5;
    return 1e-4;
}

} // namespace gsattack::testing

namespace gsattack::testing {

/// Central finite difference of a scalar function of an image.
inline Image numeric_image_gradient(const Image &img, const std::function<double(const Image &)> &f,
                                    double h = 1e-6) {
    Image g(img.width(), img.height(), img.channels());
    Image probe = img;
    for (std::size_t i = 0; i < img.size(); ++i) {
        probe[i] = img[i] + h;
        const double fp = f(probe);
        probe[i] = img[i] - h;
        const double fm = f(probe);
        probe[i] = img[i];
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

inline double max_relative_error(const Image &analytic, const Image &numeric,
                                 double floor_fraction = 1e-6) {
    Eigen::VectorXd a(static_cast<Eigen::Index>(analytic.size()));
    Eigen::VectorXd n(static_cast<Eigen::Index>(numeric.size()));
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        a[static_cast<Eigen::Index>(i)] = analytic[i];
        n[static_cast<Eigen::Index>(i)] = numeric[i];
    }
    return max_relative_error(a, n, floor_fraction);
}

} // namespace gsattack::testing
