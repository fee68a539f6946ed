#pragma once

#include <vector>

#include <Eigen/Core>

#include "gsattack/camera.hpp"
#include "gsattack/gaussians.hpp"
#include "gsattack/image.hpp"

namespace gsattack {

struct RenderSettings {
    Eigen::Vector3d background{0.5, 0.5, 0.5};
    /// Isotropic variance (px^2) added to every projected covariance.
    double screen_dilation = 0.3;
    /// Mahalanobis radius of the footprint cutoff.
    double cutoff_sigma = 3.0;

    bool operator==(const RenderSettings &) const = default;
};

struct RenderOutput {
    Image rgb;       // H x W x 3
    Image alpha;     // H x W
    Image geo_depth; // H x W, residual transmittance assigned `far`
};

/// Upstream gradients for the three render channels. Empty images mean zero.
struct RenderGrad {
    Image rgb;
    Image alpha;
    Image geo_depth;
};

/// Front-to-back splatting of `g` into view `v`.
RenderOutput render(const GaussianSet &g, const View &v, const RenderSettings &settings = {});

/// Vector-Jacobian product of `render`: accumulates d(loss)/d(params) into
/// `grad` given d(loss)/d(outputs).
void render_backward(const GaussianSet &g, const View &v, const RenderGrad &upstream,
                     GaussianSet &grad, const RenderSettings &settings = {});

/// Renders each view; order follows `views`. Views are evaluated on worker
/// threads when `parallel` is set; results do not depend on it.
std::vector<RenderOutput> render_view_set(const GaussianSet &g, const ViewSet &views,
                                          const RenderSettings &settings = {},
                                          bool parallel = true);

// Exposed for tests.
namespace detail {

/// Rotation matrix of a unit quaternion (w, x, y, z).
Eigen::Matrix3d rotation_from_quaternion(const Eigen::Vector4d &q_unit);

/// d(loss)/d(q_unit) given d(loss)/d(R) for R = rotation_from_quaternion(q_unit).
Eigen::Vector4d rotation_vjp(const Eigen::Vector4d &q_unit, const Eigen::Matrix3d &dR);

} // namespace detail

} // namespace gsattack
