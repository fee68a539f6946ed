#include "gsattack/camera.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "gsattack/error.hpp"

namespace gsattack {

double View::focal() const { return 0.5 * height / std::tan(0.5 * fov_y); }

void View::validate() const {
    if (!(near > 0.0) || !(near < far)) {
        throw DegenerateCamera("view '" + id + "': need 0 < near < far");
    }
    if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) {
        throw DegenerateCamera("view '" + id + "': fov_y outside (0, pi)");
    }
    if (width <= 0 || height <= 0) throw DegenerateCamera("view '" + id + "': empty image");
    const Eigen::Matrix3d r = rotation();
    const double err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(err <= 1e-5)) throw DegenerateCamera("view '" + id + "': rotation is not orthonormal");
    if (!world_to_camera.allFinite() ||
        world_to_camera.row(3) != Eigen::RowVector4d(0, 0, 0, 1)) {
        throw DegenerateCamera("view '" + id + "': malformed world_to_camera");
    }
}

View look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target, const Eigen::Vector3d &up) {
    const Eigen::Vector3d forward = (target - eye).normalized();
    Eigen::Vector3d right = forward.cross(up);
    if (right.norm() < 1e-9) right = forward.cross(Eigen::Vector3d::UnitY());
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);

    View v;
    Eigen::Matrix3d r;
    r.row(0) = right;
    r.row(1) = down;
    r.row(2) = forward;
    v.world_to_camera.setIdentity();
    v.world_to_camera.topLeftCorner<3, 3>() = r;
    v.world_to_camera.topRightCorner<3, 1>() = -r * eye;
    return v;
}

ViewSet make_orbit_views(const OrbitSpec &spec) {
    ViewSet views;
    views.reserve(static_cast<std::size_t>(std::max(spec.count, 0)));
    for (int i = 0; i < spec.count; ++i) {
        const double az =
            (spec.azimuth_offset_deg + 360.0 * i / spec.count) * std::numbers::pi / 180.0;
        const double el_deg =
            spec.elevations_deg.empty()
                ? 0.0
                : spec.elevations_deg[static_cast<std::size_t>(i) % spec.elevations_deg.size()];
        const double el = el_deg * std::numbers::pi / 180.0;
        const Eigen::Vector3d eye(spec.radius * std::cos(el) * std::cos(az),
                                  spec.radius * std::cos(el) * std::sin(az),
                                  spec.radius * std::sin(el));
        View v = look_at(eye, Eigen::Vector3d::Zero());
        v.fov_y = spec.fov_y;
        v.width = spec.width;
        v.height = spec.height;
        v.near = spec.near;
        v.far = spec.far;
        v.id = "view" + std::to_string(i);
        views.push_back(std::move(v));
    }
    return views;
}

ViewSet make_orbit_views(int m, double radius, const std::vector<double> &elevations_deg) {
    OrbitSpec spec;
    spec.count = m;
    spec.radius = radius;
    spec.elevations_deg = elevations_deg;
    return make_orbit_views(spec);
}

ViewSet rotate_views_about_z(const ViewSet &views, double degrees) {
    Eigen::Matrix4d world_rot = Eigen::Matrix4d::Identity();
    world_rot.topLeftCorner<3, 3>() =
        Eigen::AngleAxisd(degrees * std::numbers::pi / 180.0, Eigen::Vector3d::UnitZ())
            .toRotationMatrix();
    ViewSet out = views;
    // Camera pose P becomes Rz * P, so world_to_camera becomes W * Rz^T.
    for (auto &v : out) v.world_to_camera = v.world_to_camera * world_rot.transpose();
    return out;
}

} // namespace gsattack
