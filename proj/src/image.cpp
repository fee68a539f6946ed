#include "gsattack/image.hpp"

#include <cmath>

namespace gsattack {

Image luminance(const Image &rgb) {
    if (rgb.channels() != 3) throw ShapeMismatch("luminance: expected 3 channels");
    Image out(rgb.width(), rgb.height(), 1);
    for (std::size_t i = 0; i < rgb.pixels(); ++i) {
        out[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    }
    return out;
}

Image subtract(const Image &a, const Image &b) {
    require_same_shape(a, b, "subtract");
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

void accumulate(Image &a, const Image &b, double scale) {
    if (b.empty()) return;
    if (a.empty()) a = Image(b.width(), b.height(), b.channels());
    require_same_shape(a, b, "accumulate");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

bool all_finite(const Image &img) {
    for (double v : img.values()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

} // namespace gsattack
