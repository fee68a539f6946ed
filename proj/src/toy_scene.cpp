#include "gsattack/toy_scene.hpp"

#include <cmath>
#include <numbers>

namespace gsattack {

GaussianSet make_toy_vehicle(const ToySceneSpec &spec) {
    const ReferenceDetector detector(spec.detector_seed);
    const auto &bands = detector.band_colors(spec.class_id);
    const int rows = static_cast<int>(bands.size()) * spec.rows_per_band;
    GaussianSet g(static_cast<std::size_t>(rows) * spec.columns);
    const double row_h = spec.height / rows;
    const double arc = 2.0 * std::numbers::pi * spec.radius / spec.columns;
    std::size_t i = 0;
    for (int r = 0; r < rows; ++r) {
        // Row 0 is the top band: image rows grow downward.
        const double z = spec.z_offset + 0.5 * spec.height - (r + 0.5) * row_h;
        const Vec3 color = bands[static_cast<std::size_t>(r / spec.rows_per_band)];
        for (int c = 0; c < spec.columns; ++c, ++i) {
            const double theta = 2.0 * std::numbers::pi * (c + 0.5 * (r % 2)) / spec.columns;
            g.positions[i] = Vec3(spec.radius * std::cos(theta), spec.radius * std::sin(theta), z);
            g.opacities[i] = spec.opacity;
            // Local x is the surface normal, y the tangent, z the cylinder axis.
            g.scales[i] = Vec3(0.01, 0.6 * arc, 0.45 * row_h);
            g.rotations[i] = Vec4(std::cos(0.5 * theta), 0.0, 0.0, std::sin(0.5 * theta));
            g.colors[i] = color;
        }
    }
    return g;
}

OrbitSpec toy_orbit(int count) {
    OrbitSpec o;
    o.count = count;
    // A distant, narrow camera keeps perspective from skewing the bands.
    o.radius = 8.0;
    o.elevations_deg = {0.0};
    o.azimuth_offset_deg = 0.0;
    o.fov_y = 2.0 * std::atan(0.5 * std::tan(0.35));
    o.width = 64;
    o.height = 64;
    o.near = 0.1;
    o.far = 50.0;
    return o;
}

} // namespace gsattack
