#pragma once

#include <string>

#include "gsattack/adapters.hpp"
#include "gsattack/camera.hpp"
#include "gsattack/gaussians.hpp"

namespace gsattack {

/// Desk-scale stand-in for a vehicle asset: an upright cylinder of
/// surface-aligned Gaussians whose horizontal bands carry the reference
/// detector's template colors, so the clean scene is detected from every
/// azimuth.
struct ToySceneSpec {
    std::uint64_t detector_seed = 0;
    std::string class_id = "car";
    double radius = 0.62;
    double height = 0.76;
    int rows_per_band = 2;
    int columns = 36;      // Gaussians around the circumference per row
    double opacity = 0.95;
    double z_offset = -0.03; // aligns the bands with the detector's pooling cells

    bool operator==(const ToySceneSpec &) const = default;
};

GaussianSet make_toy_vehicle(const ToySceneSpec &spec = {});

/// Cameras matched to the toy vehicle: m views at 64 x 64 on a horizontal
/// orbit so the object spans the detector's template footprint.
OrbitSpec toy_orbit(int count = 4);

} // namespace gsattack
