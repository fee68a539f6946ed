#include "gsattack/roi.hpp"

#include <algorithm>
#include <cmath>

namespace gsattack {

ROIMask ROIMask::from_mask(int width, int height, std::vector<std::uint8_t> mask) {
    if (mask.size() != static_cast<std::size_t>(width) * height) {
        throw ShapeMismatch("ROI mask size does not match its dimensions");
    }
    ROIMask m{width, height, std::move(mask), 0, {}};
    for (auto &v : m.mask) {
        v = v ? 1 : 0;
        m.area += v;
    }
    return m;
}

ROIMask ROIMask::empty_mask(int width, int height) {
    return from_mask(width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0));
}

Box shrink_box(const Box &box, double rho, int image_width, int image_height) {
    if (!(rho > 0.0 && rho <= 1.0)) {
        throw BadRatio("shrink ratio must lie in (0, 1], got " + std::to_string(rho));
    }
    const double cx = 0.5 * (box.x1 + box.x2), cy = 0.5 * (box.y1 + box.y2);
    const double hw = 0.5 * rho * box.width(), hh = 0.5 * rho * box.height();
    return Box{cx - hw, cy - hh, cx + hw, cy + hh}.clipped(image_width, image_height);
}

bool is_degenerate(const Box &box) { return box.width() <= 1.0 || box.height() <= 1.0; }

ROIMask build_roi(std::span<const Detection> dets, const ClassSet &classes, double score_min,
                  double rho, int width, int height) {
    ROIMask roi = ROIMask::empty_mask(width, height);
    for (const Detection &d : dets) {
        if (d.score < score_min) continue;
        if (std::find(classes.begin(), classes.end(), d.class_id) == classes.end()) continue;
        const Box b = shrink_box(d.box, rho, width, height);
        if (is_degenerate(b)) continue;
        roi.source_boxes.push_back(b);
        // Pixel x is inside when x1 <= x + 0.5 <= x2.
        const int x0 = std::max(0, static_cast<int>(std::ceil(b.x1 - 0.5)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(b.x2 - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(b.y1 - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::floor(b.y2 - 0.5)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) roi.mask[static_cast<std::size_t>(y) * width + x] = 1;
    }
    roi.area = static_cast<std::size_t>(std::count(roi.mask.begin(), roi.mask.end(), 1));
    return roi;
}

} // namespace gsattack
