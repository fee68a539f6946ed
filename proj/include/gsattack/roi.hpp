#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsattack/adapters.hpp"

namespace gsattack {

struct ROIMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask; // row-major, 0 or 1
    std::size_t area = 0;
    std::vector<Box> source_boxes;

    bool contains(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
    bool empty() const { return area == 0; }

    static ROIMask from_mask(int width, int height, std::vector<std::uint8_t> mask);
    static ROIMask empty_mask(int width, int height);

    bool operator==(const ROIMask &) const = default;
};

struct RoiSettings {
    double rho = 0.8;
    double score_min = 0.30;
    /// Rebuild ROIs from the current adversarial render every N steps (0 = frozen).
    int refresh_interval = 0;

    bool operator==(const RoiSettings &) const = default;
};

/// Same centre, width and height scaled by rho, clipped to the image.
/// rho must lie in (0, 1]; throws BadRatio otherwise.
Box shrink_box(const Box &box, double rho, int image_width, int image_height);

/// Boxes with a side of at most one pixel are not rasterized.
bool is_degenerate(const Box &box);

/// Union of shrunk boxes of detections with class in `classes` and score >=
/// score_min. A pixel belongs to the mask when its centre lies in a box.
ROIMask build_roi(std::span<const Detection> dets, const ClassSet &classes, double score_min,
                  double rho, int width, int height);

} // namespace gsattack
