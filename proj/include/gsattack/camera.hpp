#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace gsattack {

/// Calibrated pinhole view. Camera space follows the x-right, y-down,
/// z-forward convention; pixel centers sit at half-integer coordinates and
/// the principal point is the image center.
struct View {
    Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();
    double fov_y = 0.7;
    int width = 512;
    int height = 512;
    double near = 0.1;
    double far = 100.0;
    std::string id;

    double focal() const;          // pixels, shared by x and y
    double cx() const { return 0.5 * width; }
    double cy() const { return 0.5 * height; }
    Eigen::Matrix3d rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Eigen::Vector3d translation() const { return world_to_camera.topRightCorner<3, 1>(); }
    Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }

    /// Throws DegenerateCamera when the view violates its invariants.
    void validate() const;

    bool operator==(const View &) const = default;
};

using ViewSet = std::vector<View>;

/// Camera looking at `target` from `eye` with world up `up` (z-up world).
View look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
             const Eigen::Vector3d &up = Eigen::Vector3d::UnitZ());

struct OrbitSpec {
    int count = 4;
    double radius = 4.0;
    std::vector<double> elevations_deg{0.0}; // cycled over cameras
    double azimuth_offset_deg = 0.0;
    double fov_y = 0.7;
    int width = 512;
    int height = 512;
    double near = 0.1;
    double far = 100.0;

    bool operator==(const OrbitSpec &) const = default;
};

/// `count` cameras at uniformly spaced azimuths (starting on +x) looking at
/// the origin. Camera i uses elevations_deg[i % size].
ViewSet make_orbit_views(const OrbitSpec &spec);
ViewSet make_orbit_views(int m, double radius, const std::vector<double> &elevations_deg);

/// Rotate every camera about the world z axis by `degrees`.
ViewSet rotate_views_about_z(const ViewSet &views, double degrees);

} // namespace gsattack
