#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gsattack/error.hpp"

namespace gsattack {

/// Dense row-major float64 image with interleaved channels.
/// Element (x, y, c) lives at ((y * width) + x) * channels + c.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double &at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
    double &operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int x, int y, int c = 0) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const Image &o) const noexcept {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    bool operator==(const Image &) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Image &a, const Image &b, const char *what) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch(std::string(what) + ": image shapes differ");
    }
}

/// Rec.601 luma of an RGB image, single channel.
Image luminance(const Image &rgb);

/// a - b elementwise.
Image subtract(const Image &a, const Image &b);

/// a += scale * b elementwise.
void accumulate(Image &a, const Image &b, double scale = 1.0);

bool all_finite(const Image &img);

} // namespace gsattack
