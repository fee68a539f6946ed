#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gsattack {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

/// Number of scalar parameters carried by one Gaussian:
/// position (3), opacity (1), scale (3), rotation quaternion (4), color (3).
inline constexpr int kDofPerGaussian = 14;

/// Offsets of each parameter group inside a 14-wide per-Gaussian row.
namespace dof {
inline constexpr int kPosition = 0;
inline constexpr int kOpacity = 3;
inline constexpr int kScale = 4;
inline constexpr int kRotation = 7;
inline constexpr int kColor = 11;
} // namespace dof

/// Structure-of-arrays set of anisotropic 3D Gaussians.
///
/// Quaternions are stored unnormalized in (w, x, y, z) order; the renderer
/// normalizes them. Scales are per-axis standard deviations. The same type
/// doubles as a gradient buffer, in which case no domain invariant applies.
struct GaussianSet {
    std::vector<Vec3> positions;
    std::vector<double> opacities;
    std::vector<Vec3> scales;
    std::vector<Vec4> rotations;
    std::vector<Vec3> colors;

    GaussianSet() = default;
    explicit GaussianSet(std::size_t n);

    std::size_t size() const noexcept { return positions.size(); }

    /// Throws ShapeMismatch when the arrays disagree in length or N == 0.
    void check_shape() const;

    /// Flattened N x 14 row-major parameter vector (layout per `dof`).
    Eigen::VectorXd flatten() const;
    static GaussianSet unflatten(const Eigen::VectorXd &flat);

    /// Zero-valued set with the same N (gradient accumulator).
    GaussianSet zeros_like() const { return GaussianSet(size()); }

    GaussianSet &operator+=(const GaussianSet &o);

    bool operator==(const GaussianSet &) const = default;
};

/// Field-wise difference `current - baseline`.
struct GaussianDelta {
    std::vector<Vec3> positions;
    std::vector<double> opacities;
    std::vector<Vec3> scales;
    std::vector<Vec4> rotations;
    std::vector<Vec3> colors;

    static GaussianDelta between(const GaussianSet &current, const GaussianSet &baseline);
};

void require_same_size(const GaussianSet &a, const GaussianSet &b, const char *what);

// ---------------------------------------------------------------------------
// Asset I/O

/// Read a binary little-endian PLY with float32 (or float64) vertex
/// properties x y z opacity scale_0..2 rot_0..3 red_f green_f blue_f.
/// Throws MalformedAsset on structural problems and ValueDomain on values
/// outside their domain (1e-6 slack on opacity and color).
GaussianSet load_gaussians(const std::filesystem::path &path);

/// Write the PLY plus a `<path>.json` sidecar manifest. Values are stored as
/// float32, so round trips are exact only for float32-representable inputs.
void save_gaussians(const GaussianSet &g, const std::filesystem::path &path,
                    const std::string &provenance = "gsattack");

// ---------------------------------------------------------------------------
// Regularizers and drift

struct ShapeWeights {
    double position = 1.0;
    double scale = 1.0;
    double rotation = 1.0;
    double unit_quaternion = 1.0; // zeta

    bool operator==(const ShapeWeights &) const = default;
};

/// sum_i w_mu |dmu_i|^2 + w_s |ds_i|^2 + w_q |dq_i|^2 + zeta sum_i (|q_i|^2 - 1)^2
double shape_loss(const GaussianSet &g, const GaussianSet &g0, const ShapeWeights &w);

/// Same value; adds d(loss)/d(g) * scale into `grad`.
double shape_loss(const GaussianSet &g, const GaussianSet &g0, const ShapeWeights &w,
                  GaussianSet &grad, double scale = 1.0);

struct SideDeltaTerms {
    double position = 0.0; // mean_i |dmu_i|
    double rotation = 0.0; // mean_i |dq_i|
    double opacity = 0.0;  // mean_i da_i^2
    double scale = 0.0;    // mean_i |ds_i|^2 / 3
    double color = 0.0;    // mean_i |dc_i|^2 / 3

    double total() const { return position + rotation + opacity + scale + color; }
};

SideDeltaTerms side_delta_terms(const GaussianSet &g, const GaussianSet &g0);

/// Parameter drift score (raw units; tables report it x1e3).
double side_delta(const GaussianSet &g, const GaussianSet &g0);

inline constexpr double kMinScale = 1e-4;

/// Clamp opacity and color into [0, 1] and scale to >= kMinScale.
/// Positions and rotations are left untouched.
GaussianSet project_feasible(GaussianSet g);
void project_feasible_inplace(GaussianSet &g);

} // namespace gsattack
