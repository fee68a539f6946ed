#include "gsattack/eot.hpp"

#include <algorithm>
#include <cmath>

namespace gsattack {

std::string to_string(EotMode mode) {
    switch (mode) {
    case EotMode::Off: return "off";
    case EotMode::Partial: return "partial";
    case EotMode::On: return "on";
    }
    return "on";
}

EotMode eot_mode_from_string(const std::string &s) {
    if (s == "off") return EotMode::Off;
    if (s == "partial") return EotMode::Partial;
    if (s == "on") return EotMode::On;
    throw ConfigError("unknown EOT mode '" + s + "'");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = splitmix64(root);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return splitmix64(h ^ c);
}

ImageTransform sample_transform(const EotConfig &cfg, std::mt19937_64 &rng) {
    if (cfg.mode == EotMode::Off) return ImageTransform{};
    const auto uniform = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    TransformParams p;
    p.photometric = true;
    p.brightness = uniform(cfg.brightness_min, cfg.brightness_max);
    p.contrast = uniform(cfg.contrast_min, cfg.contrast_max);
    p.noise_sigma = uniform(0.0, cfg.noise_sigma_max);
    p.noise_seed = rng();
    if (cfg.mode == EotMode::On) {
        p.geometric = true;
        const double rot = cfg.rotation_deg * M_PI / 180.0;
        p.rotation_rad = uniform(-rot, rot);
        p.tx = uniform(-cfg.translation_frac, cfg.translation_frac);
        p.ty = uniform(-cfg.translation_frac, cfg.translation_frac);
        p.scale = uniform(cfg.scale_min, cfg.scale_max);
    }
    return ImageTransform(p);
}

std::vector<ImageTransform> transforms_for(const EotConfig &cfg, std::uint64_t step,
                                           std::uint64_t view) {
    std::vector<ImageTransform> out;
    const int k = cfg.effective_samples();
    if (k < 1) throw ConfigError("EOT needs at least one sample per view");
    for (int s = 0; s < k; ++s) {
        std::mt19937_64 rng(derive_seed(cfg.seed, step, view, static_cast<std::uint64_t>(s)));
        out.push_back(sample_transform(cfg, rng));
    }
    return out;
}

double expect_over_transforms(const Image &img, std::span<const ImageTransform> transforms,
                              const std::function<double(const Image &)> &f) {
    if (transforms.empty()) return f(img);
    double acc = 0.0;
    for (const auto &t : transforms) acc += f(t.apply(img));
    return acc / double(transforms.size());
}

namespace {

// Bilinear source footprint of output pixel (x, y): four taps with weights.
struct Footprint {
    int x0, y0, x1, y1;
    double wx, wy;
};

Footprint footprint(const TransformParams &p, int width, int height, int x, int y) {
    // Forward map: q = c + s R (p - c) + t. Invert for the source position.
    const double cx = 0.5 * width, cy = 0.5 * height;
    const double dx = x + 0.5 - cx - p.tx * width, dy = y + 0.5 - cy - p.ty * height;
    const double cs = std::cos(p.rotation_rad), sn = std::sin(p.rotation_rad);
    const double sx = (cs * dx + sn * dy) / p.scale + cx - 0.5;
    const double sy = (-sn * dx + cs * dy) / p.scale + cy - 0.5;
    const double ux = std::clamp(sx, 0.0, double(width - 1));
    const double uy = std::clamp(sy, 0.0, double(height - 1));
    const int x0 = static_cast<int>(std::floor(ux)), y0 = static_cast<int>(std::floor(uy));
    return {x0, y0, std::min(x0 + 1, width - 1), std::min(y0 + 1, height - 1), ux - x0, uy - y0};
}

} // namespace

Image ImageTransform::warp(const Image &img) const {
    Image out(img.width(), img.height(), img.channels());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Footprint f = footprint(params_, img.width(), img.height(), x, y);
            for (int c = 0; c < img.channels(); ++c) {
                out.at(x, y, c) = (1 - f.wy) * ((1 - f.wx) * img.at(f.x0, f.y0, c) + f.wx * img.at(f.x1, f.y0, c)) +
                                  f.wy * ((1 - f.wx) * img.at(f.x0, f.y1, c) + f.wx * img.at(f.x1, f.y1, c));
            }
        }
    }
    return out;
}

Image ImageTransform::warp_backward(const Image &img, const Image &grad_out) const {
    Image g(img.width(), img.height(), img.channels());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Footprint f = footprint(params_, img.width(), img.height(), x, y);
            for (int c = 0; c < img.channels(); ++c) {
                const double go = grad_out.at(x, y, c);
                g.at(f.x0, f.y0, c) += (1 - f.wy) * (1 - f.wx) * go;
                g.at(f.x1, f.y0, c) += (1 - f.wy) * f.wx * go;
                g.at(f.x0, f.y1, c) += f.wy * (1 - f.wx) * go;
                g.at(f.x1, f.y1, c) += f.wy * f.wx * go;
            }
        }
    }
    return g;
}

Image ImageTransform::noise(int width, int height, int channels) const {
    Image n(width, height, channels);
    if (params_.noise_sigma <= 0.0) return n;
    std::mt19937_64 rng(params_.noise_seed);
    std::normal_distribution<double> normal(0.0, params_.noise_sigma);
    for (double &v : n.values()) v = normal(rng);
    return n;
}

Image ImageTransform::apply(const Image &img) const {
    if (is_identity()) return img;
    Image out = params_.geometric ? warp(img) : img;
    if (params_.photometric) {
        const Image n = noise(img.width(), img.height(), img.channels());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double v = ((out[i] - 0.5) * params_.contrast + 0.5) * params_.brightness + n[i];
            out[i] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

Image ImageTransform::backward(const Image &img, const Image &grad_out) const {
    require_same_shape(img, grad_out, "transform backward");
    if (is_identity()) return grad_out;
    const Image warped = params_.geometric ? warp(img) : img;
    Image g = grad_out;
    if (params_.photometric) {
        const Image n = noise(img.width(), img.height(), img.channels());
        const double gain = params_.contrast * params_.brightness;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = ((warped[i] - 0.5) * params_.contrast + 0.5) * params_.brightness + n[i];
            g[i] = v < 0.0 || v > 1.0 ? 0.0 : g[i] * gain;
        }
    }
    return params_.geometric ? warp_backward(img, g) : g;
}

} // namespace gsattack
