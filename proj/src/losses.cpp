#include "gsattack/losses.hpp"

#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

namespace gsattack {

void LossWeights::validate() const {
    const double nonneg[] = {det, dep, shape, print, tv, hf, shape_terms.position,
                             shape_terms.scale, shape_terms.rotation, shape_terms.unit_quaternion};
    for (double v : nonneg) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be nonnegative");
    }
    if (!(delta > 0.0) || !(epsilon > 0.0)) throw ConfigError("delta and epsilon must be positive");
    if (!(linf_budget >= 0.0 && linf_budget <= 1.0)) {
        throw ConfigError("color budget must lie in [0, 1]");
    }
}

WithGrad<std::vector<std::vector<double>>> det_loss(const std::vector<std::vector<double>> &p,
                                                    double delta) {
    WithGrad<std::vector<std::vector<double>>> out;
    out.grad.resize(p.size());
    if (p.empty()) return out;
    const double view_scale = 1.0 / double(p.size());
    for (std::size_t v = 0; v < p.size(); ++v) {
        out.grad[v].assign(p[v].size(), 0.0);
        if (p[v].empty()) continue;
        const double scale = view_scale / double(p[v].size());
        double acc = 0.0;
        for (std::size_t t = 0; t < p[v].size(); ++t) {
            const double arg = 1.0 - p[v][t] + delta;
            acc += -std::log(arg);
            out.grad[v][t] = scale / arg;
        }
        out.value += acc * scale;
    }
    return out;
}

Image log_depth_residual(const Image &d, const Image &d0, double eps) {
    require_same_shape(d, d0, "log_depth_residual");
    Image r(d.width(), d.height(), d.channels());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::log(d[i] + eps) - std::log(d0[i] + eps);
    return r;
}

WithGrad<std::vector<Image>> depth_loss(std::span<const Image> residuals,
                                        std::span<const ROIMask> rois, const DepthTarget &target) {
    if (residuals.size() != rois.size()) throw ShapeMismatch("depth_loss: one ROI per view");
    WithGrad<std::vector<Image>> out;
    out.grad.resize(residuals.size());
    std::size_t active = 0;
    for (const auto &roi : rois) active += roi.empty() ? 0 : 1;
    const double t = target.value();
    for (std::size_t v = 0; v < residuals.size(); ++v) {
        const Image &r = residuals[v];
        const ROIMask &roi = rois[v];
        if (r.width() != roi.width || r.height() != roi.height || r.channels() != 1) {
            throw ShapeMismatch("depth_loss: residual and ROI shapes differ");
        }
        out.grad[v] = Image(r.width(), r.height(), 1);
        if (roi.empty()) continue;
        const double scale = 1.0 / (double(active) * double(roi.area));
        double acc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (!roi.mask[i]) continue;
            const double e = r[i] - t;
            acc += e * e;
            out.grad[v][i] = 2.0 * e * scale;
        }
        out.value += acc * scale;
    }
    return out;
}

WithGrad<std::vector<Vec3>> linf_budget_loss(std::span<const Vec3> color_deltas, double budget) {
    WithGrad<std::vector<Vec3>> out;
    out.grad.assign(color_deltas.size(), Vec3::Zero());
    double best = -1.0;
    std::size_t bi = 0;
    int bc = 0;
    for (std::size_t i = 0; i < color_deltas.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const double a = std::abs(color_deltas[i][c]);
            if (a > best) {
                best = a;
                bi = i;
                bc = c;
            }
        }
    }
    if (best > budget) {
        out.value = best - budget;
        out.grad[bi][bc] = color_deltas[bi][bc] >= 0 ? 1.0 : -1.0;
    }
    return out;
}

WithGrad<std::vector<Image>> tv_loss(std::span<const Image> residuals) {
    WithGrad<std::vector<Image>> out;
    out.grad.resize(residuals.size());
    if (residuals.empty()) return out;
    const double scale = 1.0 / double(residuals.size());
    for (std::size_t v = 0; v < residuals.size(); ++v) {
        const Image &r = residuals[v];
        Image &g = out.grad[v];
        g = Image(r.width(), r.height(), r.channels());
        double acc = 0.0;
        for (int y = 0; y < r.height(); ++y) {
            for (int x = 0; x < r.width(); ++x) {
                for (int c = 0; c < r.channels(); ++c) {
                    const double here = r.at(x, y, c);
                    const double dx = x + 1 < r.width() ? r.at(x + 1, y, c) - here : 0.0;
                    const double dy = y + 1 < r.height() ? r.at(x, y + 1, c) - here : 0.0;
                    const double n = std::sqrt(dx * dx + dy * dy);
                    acc += n;
                    if (n == 0.0) continue;
                    const double gx = scale * dx / n, gy = scale * dy / n;
                    if (x + 1 < r.width()) {
                        g.at(x + 1, y, c) += gx;
                        g.at(x, y, c) -= gx;
                    }
                    if (y + 1 < r.height()) {
                        g.at(x, y + 1, c) += gy;
                        g.at(x, y, c) -= gy;
                    }
                }
            }
        }
        out.value += acc * scale;
    }
    return out;
}

double hf_ring_weight(int kx, int ky, int width, int height) {
    const auto centred = [](int k, int n) {
        const int s = k <= n / 2 ? k : k - n;
        return double(s) / n;
    };
    const double fx = centred(kx, width), fy = centred(ky, height);
    const double r = std::sqrt(fx * fx + fy * fy);
    return r >= 0.25 && r <= 0.5 ? 1.0 : 0.0;
}

namespace {

using Spectrum = std::vector<std::complex<double>>; // row-major height x width

// Unnormalized 2D DFT (sign -1) or its adjoint (sign +1, no 1/N).
Spectrum dft2(Spectrum data, int width, int height, bool inverse) {
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<std::complex<double>> in, res;
    auto run = [&](std::vector<std::complex<double>> &src) {
        if (inverse) {
            fft.inv(res, src);
        } else {
            fft.fwd(res, src);
        }
    };
    in.resize(static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) in[x] = data[static_cast<std::size_t>(y) * width + x];
        run(in);
        for (int x = 0; x < width; ++x) data[static_cast<std::size_t>(y) * width + x] = res[x];
    }
    in.resize(static_cast<std::size_t>(height));
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) in[y] = data[static_cast<std::size_t>(y) * width + x];
        run(in);
        for (int y = 0; y < height; ++y) data[static_cast<std::size_t>(y) * width + x] = res[y];
    }
    return data;
}

} // namespace

WithGrad<std::vector<Image>> hf_loss(std::span<const Image> residuals) {
    WithGrad<std::vector<Image>> out;
    out.grad.resize(residuals.size());
    if (residuals.empty()) return out;
    const double scale = 1.0 / double(residuals.size());
    for (std::size_t v = 0; v < residuals.size(); ++v) {
        const Image &r = residuals[v];
        const int w = r.width(), h = r.height();
        out.grad[v] = Image(w, h, r.channels());
        std::vector<double> ring(static_cast<std::size_t>(w) * h);
        for (int ky = 0; ky < h; ++ky)
            for (int kx = 0; kx < w; ++kx)
                ring[static_cast<std::size_t>(ky) * w + kx] = hf_ring_weight(kx, ky, w, h);
        for (int c = 0; c < r.channels(); ++c) {
            Spectrum s(static_cast<std::size_t>(w) * h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) s[static_cast<std::size_t>(y) * w + x] = r.at(x, y, c);
            Spectrum f = dft2(std::move(s), w, h, false);
            double acc = 0.0;
            for (std::size_t k = 0; k < f.size(); ++k) {
                const double mag = std::abs(f[k]);
                acc += ring[k] * mag;
                // d|F_k|/dR = Re(conj(F_k) e^{-i theta}) / |F_k|; collect U_k = W_k F_k / |F_k|.
                f[k] = ring[k] != 0.0 && mag > 0.0 ? f[k] * (ring[k] / mag) : 0.0;
            }
            out.value += acc * scale;
            const Spectrum g = dft2(std::move(f), w, h, true);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.grad[v].at(x, y, c) = scale * g[static_cast<std::size_t>(y) * w + x].real();
        }
    }
    return out;
}

double print_loss(const PrintTerms &terms, const LossWeights &w) {
    return terms.linf + w.tv * terms.tv + w.hf * terms.hf;
}

LossBreakdown total_loss(LossBreakdown terms, const LossWeights &w) {
    terms.print = print_loss({terms.linf, terms.tv, terms.hf}, w);
    terms.total = w.det * terms.det + w.dep * terms.dep + w.shape * terms.shape + w.print * terms.print;
    return terms;
}

} // namespace gsattack
