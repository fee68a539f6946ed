#pragma once

#include <span>
#include <vector>

#include "gsattack/gaussians.hpp"
#include "gsattack/image.hpp"
#include "gsattack/roi.hpp"

namespace gsattack {

struct LossWeights {
    double det = 1.0;
    double dep = 1.0;
    double shape = 0.2;
    double print = 0.1;
    double tv = 1e-4;   // alpha_TV
    double hf = 1e-5;   // gamma_HF
    ShapeWeights shape_terms;
    double delta = 1e-6;    // detection log stabilizer
    double epsilon = 1e-6;  // log-depth stabilizer
    double linf_budget = 0.3;

    /// Throws ConfigError when a weight is negative or a stabilizer is not positive.
    void validate() const;

    bool operator==(const LossWeights &) const = default;
};

struct DepthTarget {
    int sign = +1;     // +1 push far, -1 pull near
    double beta = 0.0; // log-depth units

    double value() const { return sign * beta; }
    bool operator==(const DepthTarget &) const = default;
};

/// A scalar together with its gradient w.r.t. some input.
template <class G>
struct WithGrad {
    double value = 0.0;
    G grad;
};

// -- detection ---------------------------------------------------------------

/// p[v][t]: max target confidence of view v under EOT sample t.
/// mean_v mean_t -log(1 - p + delta); grad has the shape of p.
WithGrad<std::vector<std::vector<double>>> det_loss(const std::vector<std::vector<double>> &p,
                                                    double delta);

// -- depth -------------------------------------------------------------------

/// log(d + eps) - log(d0 + eps), per pixel.
Image log_depth_residual(const Image &d, const Image &d0, double eps);

/// Mean over views with a nonempty ROI of mean over the ROI of
/// (residual - target)^2. grad[v] is d(loss)/d(residual_v) (zero off-ROI
/// and on skipped views).
WithGrad<std::vector<Image>> depth_loss(std::span<const Image> residuals,
                                        std::span<const ROIMask> rois, const DepthTarget &target);

// -- printability ------------------------------------------------------------

/// max(0, max |dc| - budget); the subgradient goes to the first maximal element.
WithGrad<std::vector<Vec3>> linf_budget_loss(std::span<const Vec3> color_deltas, double budget);

/// Mean over views of the isotropic TV of each residual image: forward
/// differences (zero on the last row / column), sqrt(dx^2 + dy^2) per pixel
/// and channel, summed.
WithGrad<std::vector<Image>> tv_loss(std::span<const Image> residuals);

/// Ring mask on normalized frequency radius: 1 inside [0.25, 0.5].
double hf_ring_weight(int kx, int ky, int width, int height);

/// Mean over views of sum_channels <W, |DFT(R_c)|>.
WithGrad<std::vector<Image>> hf_loss(std::span<const Image> residuals);

struct PrintTerms {
    double linf = 0.0;
    double tv = 0.0;
    double hf = 0.0;
};

double print_loss(const PrintTerms &terms, const LossWeights &w);

struct LossBreakdown {
    double det = 0.0;
    double dep = 0.0;
    double shape = 0.0;
    double linf = 0.0;
    double tv = 0.0;
    double hf = 0.0;
    double print = 0.0;
    double total = 0.0;

    bool operator==(const LossBreakdown &) const = default;
};

/// Fills `print` and `total` from the component terms.
LossBreakdown total_loss(LossBreakdown terms, const LossWeights &w);

} // namespace gsattack
