#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gsattack/image.hpp"

namespace gsattack {

enum class EotMode { Off, Partial, On };

std::string to_string(EotMode mode);
EotMode eot_mode_from_string(const std::string &s);

struct EotConfig {
    EotMode mode = EotMode::On;
    int samples = 4; // per view; forced to 1 when mode is Off
    double brightness_min = 0.8, brightness_max = 1.2;
    double contrast_min = 0.8, contrast_max = 1.2;
    double noise_sigma_max = 0.02;
    double rotation_deg = 5.0;        // symmetric range
    double translation_frac = 0.02;   // of image width / height, symmetric
    double scale_min = 0.95, scale_max = 1.05;
    std::uint64_t seed = 0;

    int effective_samples() const { return mode == EotMode::Off ? 1 : samples; }
    bool operator==(const EotConfig &) const = default;
};

/// Realized parameters of one transform draw.
struct TransformParams {
    double brightness = 1.0;
    double contrast = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
    double rotation_rad = 0.0;
    double tx = 0.0; // fraction of width
    double ty = 0.0; // fraction of height
    double scale = 1.0;
    bool geometric = false;
    bool photometric = false;
};

/// Differentiable image operator: optional affine warp about the image
/// centre (bilinear, edge-clamped), then contrast about 0.5, brightness
/// gain, additive Gaussian noise, and a clamp to [0, 1].
class ImageTransform {
public:
    ImageTransform() = default; // identity
    explicit ImageTransform(TransformParams params) : params_(params) {}

    bool is_identity() const { return !params_.geometric && !params_.photometric; }
    const TransformParams &params() const { return params_; }

    Image apply(const Image &img) const;
    /// Gradient w.r.t. the input given the gradient w.r.t. apply(img).
    Image backward(const Image &img, const Image &grad_out) const;

private:
    Image warp(const Image &img) const;
    Image warp_backward(const Image &img, const Image &grad_out) const;
    Image noise(int width, int height, int channels) const;

    TransformParams params_;
};

/// Deterministic 64-bit mix of a root seed with stream coordinates.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// One draw from the configured distribution using `rng`.
ImageTransform sample_transform(const EotConfig &cfg, std::mt19937_64 &rng);

/// The k transforms used for (step, view): sample s is drawn from a stream
/// seeded with derive_seed(cfg.seed, step, view, s), so the set does not
/// depend on evaluation order.
std::vector<ImageTransform> transforms_for(const EotConfig &cfg, std::uint64_t step,
                                           std::uint64_t view);

/// Monte Carlo mean of f over the given transforms.
double expect_over_transforms(const Image &img, std::span<const ImageTransform> transforms,
                              const std::function<double(const Image &)> &f);

} // namespace gsattack
