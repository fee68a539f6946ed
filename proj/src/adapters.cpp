#include "gsattack/adapters.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "gsattack/eot.hpp"
#include "gsattack/io.hpp"

namespace gsattack {

Box Box::clipped(int image_width, int image_height) const {
    return {std::clamp(x1, 0.0, double(image_width)), std::clamp(y1, 0.0, double(image_height)),
            std::clamp(x2, 0.0, double(image_width)), std::clamp(y2, 0.0, double(image_height))};
}

double iou(const Box &a, const Box &b) {
    const Box inter{std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2),
                    std::min(a.y2, b.y2)};
    const double i = inter.area();
    const double u = a.area() + b.area() - i;
    return u > 0 ? i / u : 0.0;
}

ClassSet default_target_classes() { return {"car", "truck", "bus"}; }

void Detector::score_backward(const Image &, std::span<const Detection>, std::span<const double>,
                              Image &) const {
    throw AdapterFailure("detector '" + id() + "' does not provide score gradients");
}

void DepthEstimator::backward(const Image &, const Image &, Image &) const {
    throw AdapterFailure("depth estimator '" + id() + "' does not provide gradients");
}

TargetConfidence max_target_confidence(std::span<const Detection> dets, const ClassSet &classes) {
    TargetConfidence best;
    for (std::size_t k = 0; k < dets.size(); ++k) {
        if (std::find(classes.begin(), classes.end(), dets[k].class_id) == classes.end()) continue;
        if (best.index < 0 || dets[k].score > best.value) {
            best = {dets[k].score, static_cast<int>(k)};
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Reference detector

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_rgb(const Image &rgb, const std::string &who) {
    if (rgb.channels() != 3 || rgb.empty()) {
        throw AdapterFailure(who + ": expected a non-empty RGB image");
    }
    if (!all_finite(rgb)) throw AdapterFailure(who + ": non-finite input image");
}

// Area-weighted resampling of n source pixels onto g cells: cell i covers
// [i n / g, (i + 1) n / g) in pixel units and averages what it overlaps.
struct Tap {
    int pixel;
    double weight;
};

std::vector<std::vector<Tap>> area_taps(int n, int g) {
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(g));
    const double step = double(n) / g;
    for (int i = 0; i < g; ++i) {
        const double lo = i * step, hi = (i + 1) * step;
        for (int p = static_cast<int>(std::floor(lo)); p < n && p < hi; ++p) {
            const double overlap = std::min(hi, p + 1.0) - std::max(lo, double(p));
            if (overlap > 0) taps[static_cast<std::size_t>(i)].push_back({p, overlap / step});
        }
    }
    return taps;
}

} // namespace

ReferenceDetector::ReferenceDetector(std::uint64_t seed, ReferenceDetectorOptions options)
    : id_("refdet:" + std::to_string(seed)), options_(std::move(options)) {
    const auto &o = options_;
    if (o.grid <= 0 || o.window_w > o.grid || o.window_h > o.grid || o.object_w > o.window_w ||
        o.object_h > o.window_h || o.bands <= 0 || o.bands > o.object_h || o.classes.empty()) {
        throw ConfigError("inconsistent reference detector geometry");
    }
    // Band offsets from mid-gray are zero-mean per channel, so a template
    // carries no object-versus-background contrast, and they are made
    // orthogonal across classes (Gram-Schmidt) so classes only respond to
    // their own band pattern.
    const int dim = 3 * o.bands;
    std::vector<Eigen::VectorXd> basis;
    for (std::size_t c = 0; c < o.classes.size(); ++c) {
        std::mt19937_64 rng(derive_seed(seed, 0x646574, c));
        std::uniform_real_distribution<double> offset(-1.0, 1.0);
        Eigen::VectorXd d(dim);
        for (int i = 0; i < dim; ++i) d[i] = offset(rng);
        for (int ch = 0; ch < 3; ++ch) {
            double mean = 0.0;
            for (int b = 0; b < o.bands; ++b) mean += d[3 * b + ch] / o.bands;
            for (int b = 0; b < o.bands; ++b) d[3 * b + ch] -= mean;
        }
        for (const auto &e : basis) d -= d.dot(e) * e;
        if (d.norm() < 1e-9) throw ConfigError("too many classes for the band count");
        basis.push_back(d.normalized());
        const double peak = d.cwiseAbs().maxCoeff();
        Template t;
        for (int b = 0; b < o.bands; ++b) {
            t.bands.push_back(Eigen::Vector3d::Constant(0.5) + (0.4 / peak) * d.segment<3>(3 * b));
        }
        templates_.push_back(std::move(t));
        Template &tt = templates_.back();
        tt.weights.resize(static_cast<std::size_t>(o.window_w) * o.window_h * 3);
        for (int ch = 0; ch < 3; ++ch) {
            double mean = 0.0;
            for (int v = 0; v < o.window_h; ++v)
                for (int u = 0; u < o.window_w; ++u) mean += template_value(tt, u, v, ch);
            mean /= double(o.window_w) * o.window_h;
            for (int v = 0; v < o.window_h; ++v)
                for (int u = 0; u < o.window_w; ++u)
                    tt.weights[(static_cast<std::size_t>(v) * o.window_w + u) * 3 + ch] =
                        template_value(tt, u, v, ch) - mean;
        }
        tt.norm = 0.0;
        for (double w : tt.weights) tt.norm += w * w;
    }
}

double ReferenceDetector::template_value(const Template &t, int u, int v, int ch) const {
    const auto &o = options_;
    const int ox = (o.window_w - o.object_w) / 2, oy = (o.window_h - o.object_h) / 2;
    if (u < ox || u >= ox + o.object_w || v < oy || v >= oy + o.object_h) return 0.5;
    const int band = (v - oy) * o.bands / o.object_h;
    return t.bands[static_cast<std::size_t>(band)][ch];
}

int ReferenceDetector::class_index(const std::string &class_id) const {
    const auto it = std::find(options_.classes.begin(), options_.classes.end(), class_id);
    if (it == options_.classes.end()) {
        throw AdapterFailure(id_ + ": unknown class '" + class_id + "'");
    }
    return static_cast<int>(it - options_.classes.begin());
}

const std::vector<Eigen::Vector3d> &ReferenceDetector::band_colors(const std::string &class_id) const {
    return templates_[static_cast<std::size_t>(class_index(class_id))].bands;
}

Image ReferenceDetector::template_image(const std::string &class_id, int width, int height) const {
    const Template &t = templates_[static_cast<std::size_t>(class_index(class_id))];
    const auto &o = options_;
    Image img(width, height, 3, 0.5);
    const double sx = double(width) / o.grid, sy = double(height) / o.grid;
    const int u0 = (o.grid - o.window_w) / 2, v0 = (o.grid - o.window_h) / 2;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int u = static_cast<int>(std::floor((x + 0.5) / sx)) - u0;
            const int v = static_cast<int>(std::floor((y + 0.5) / sy)) - v0;
            if (u < 0 || u >= o.window_w || v < 0 || v >= o.window_h) continue;
            for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = template_value(t, u, v, ch);
        }
    }
    return img;
}

Image ReferenceDetector::pool(const Image &rgb) const {
    const int g = options_.grid;
    const auto tx = area_taps(rgb.width(), g), ty = area_taps(rgb.height(), g);
    Image out(g, g, 3);
    for (int j = 0; j < g; ++j) {
        for (int i = 0; i < g; ++i) {
            for (const Tap &a : ty[static_cast<std::size_t>(j)]) {
                for (const Tap &b : tx[static_cast<std::size_t>(i)]) {
                    const double w = a.weight * b.weight;
                    for (int ch = 0; ch < 3; ++ch) out.at(i, j, ch) += w * rgb.at(b.pixel, a.pixel, ch);
                }
            }
        }
    }
    return out;
}

std::vector<Image> ReferenceDetector::score_maps(const Image &rgb) const {
    require_rgb(rgb, id_);
    const auto &o = options_;
    const Image pooled = pool(rgb);
    const int mw = o.grid - o.window_w + 1, mh = o.grid - o.window_h + 1;
    std::vector<Image> maps;
    for (const Template &t : templates_) {
        Image map(mw, mh, 1);
        for (int y = 0; y < mh; ++y) {
            for (int x = 0; x < mw; ++x) {
                double acc = 0.0;
                for (int v = 0; v < o.window_h; ++v) {
                    for (int u = 0; u < o.window_w; ++u) {
                        const double *w = &t.weights[(static_cast<std::size_t>(v) * o.window_w + u) * 3];
                        for (int ch = 0; ch < 3; ++ch) acc += w[ch] * pooled.at(x + u, y + v, ch);
                    }
                }
                map.at(x, y) = sigmoid(o.gain * acc / t.norm - o.bias);
            }
        }
        maps.push_back(std::move(map));
    }
    return maps;
}

std::vector<Detection> ReferenceDetector::detect(const Image &rgb) const {
    const auto maps = score_maps(rgb);
    const auto &o = options_;
    const double sx = double(rgb.width()) / o.grid, sy = double(rgb.height()) / o.grid;
    const int ox = (o.window_w - o.object_w) / 2, oy = (o.window_h - o.object_h) / 2;
    std::vector<Detection> dets;
    for (std::size_t c = 0; c < maps.size(); ++c) {
        const Image &m = maps[c];
        std::vector<int> label(m.pixels(), -1);
        for (int start = 0; start < static_cast<int>(m.pixels()); ++start) {
            if (label[start] >= 0 || m[start] < o.threshold) continue;
            // Flood fill one 4-connected component, tracking its peak.
            std::vector<int> stack{start};
            label[start] = start;
            int peak = start;
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                if (m[p] > m[peak]) peak = p;
                const int x = p % m.width(), y = p / m.width();
                const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
                for (const auto &n : nbr) {
                    if (n[0] < 0 || n[1] < 0 || n[0] >= m.width() || n[1] >= m.height()) continue;
                    const int q = n[1] * m.width() + n[0];
                    if (label[q] >= 0 || m[q] < o.threshold) continue;
                    label[q] = start;
                    stack.push_back(q);
                }
            }
            const int px = peak % m.width(), py = peak / m.width();
            Box box{(px + ox) * sx, (py + oy) * sy, (px + ox + o.object_w) * sx,
                    (py + oy + o.object_h) * sy};
            dets.push_back({box.clipped(rgb.width(), rgb.height()), o.classes[c], m[peak], peak});
        }
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection &a, const Detection &b) { return a.score > b.score; });
    // Class-agnostic non-maximum suppression.
    std::vector<Detection> kept;
    for (const Detection &d : dets) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection &k) {
            return iou(k.box, d.box) > o.nms_iou;
        });
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

void ReferenceDetector::score_backward(const Image &rgb, std::span<const Detection> dets,
                                       std::span<const double> weights, Image &grad_image) const {
    require_rgb(rgb, id_);
    if (dets.size() != weights.size()) throw ShapeMismatch("score_backward: weights/detections");
    if (grad_image.empty()) grad_image = Image(rgb.width(), rgb.height(), 3);
    require_same_shape(rgb, grad_image, "score_backward");
    const auto &o = options_;
    const int mw = o.grid - o.window_w + 1, mh = o.grid - o.window_h + 1;
    const Image pooled = pool(rgb);
    Image grad_pooled(o.grid, o.grid, 3);
    bool any = false;
    for (std::size_t k = 0; k < dets.size(); ++k) {
        if (weights[k] == 0.0) continue;
        const Detection &d = dets[k];
        if (d.anchor < 0 || d.anchor >= mw * mh) {
            throw AdapterFailure(id_ + ": detection has no valid anchor");
        }
        const Template &t = templates_[static_cast<std::size_t>(class_index(d.class_id))];
        const int x = d.anchor % mw, y = d.anchor / mw;
        double acc = 0.0;
        for (int v = 0; v < o.window_h; ++v)
            for (int u = 0; u < o.window_w; ++u)
                for (int ch = 0; ch < 3; ++ch)
                    acc += t.weights[(static_cast<std::size_t>(v) * o.window_w + u) * 3 + ch] *
                           pooled.at(x + u, y + v, ch);
        const double s = sigmoid(o.gain * acc / t.norm - o.bias);
        const double g = weights[k] * s * (1.0 - s) * o.gain / t.norm;
        for (int v = 0; v < o.window_h; ++v)
            for (int u = 0; u < o.window_w; ++u)
                for (int ch = 0; ch < 3; ++ch)
                    grad_pooled.at(x + u, y + v, ch) +=
                        g * t.weights[(static_cast<std::size_t>(v) * o.window_w + u) * 3 + ch];
        any = true;
    }
    if (!any) return;
    const auto tx = area_taps(rgb.width(), o.grid), ty = area_taps(rgb.height(), o.grid);
    for (int j = 0; j < o.grid; ++j) {
        for (int i = 0; i < o.grid; ++i) {
            for (const Tap &a : ty[static_cast<std::size_t>(j)]) {
                for (const Tap &b : tx[static_cast<std::size_t>(i)]) {
                    const double w = a.weight * b.weight;
                    for (int ch = 0; ch < 3; ++ch)
                        grad_image.at(b.pixel, a.pixel, ch) += w * grad_pooled.at(i, j, ch);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Reference depth head

namespace {

ReferenceDepthParams depth_params_from_seed(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0x646570));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ReferenceDepthParams p;
    p.base_depth = 3.0 + 2.0 * u(rng);
    p.gain = 1.5 + u(rng);
    p.blur_sigma = 1.0 + u(rng);
    return p;
}

// One separable pass along x (axis 0) or y (axis 1) with edge replication.
Image blur_pass(const Image &in, const std::vector<double> &kernel, int axis) {
    const int r = static_cast<int>(kernel.size() / 2);
    Image out(in.width(), in.height(), 1);
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int sx = axis == 0 ? std::clamp(x + k, 0, in.width() - 1) : x;
                const int sy = axis == 1 ? std::clamp(y + k, 0, in.height() - 1) : y;
                acc += kernel[static_cast<std::size_t>(k + r)] * in.at(sx, sy);
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

Image blur_pass_transpose(const Image &grad, const std::vector<double> &kernel, int axis) {
    const int r = static_cast<int>(kernel.size() / 2);
    Image out(grad.width(), grad.height(), 1);
    for (int y = 0; y < grad.height(); ++y) {
        for (int x = 0; x < grad.width(); ++x) {
            const double g = grad.at(x, y);
            for (int k = -r; k <= r; ++k) {
                const int sx = axis == 0 ? std::clamp(x + k, 0, grad.width() - 1) : x;
                const int sy = axis == 1 ? std::clamp(y + k, 0, grad.height() - 1) : y;
                out.at(sx, sy) += kernel[static_cast<std::size_t>(k + r)] * g;
            }
        }
    }
    return out;
}

} // namespace

ReferenceDepthHead::ReferenceDepthHead(std::uint64_t seed)
    : ReferenceDepthHead(depth_params_from_seed(seed), "refdepth:" + std::to_string(seed)) {}

ReferenceDepthHead::ReferenceDepthHead(ReferenceDepthParams params, std::string id)
    : id_(std::move(id)), params_(params) {
    if (!(params_.base_depth > 0) || !(params_.blur_sigma >= 0) || !std::isfinite(params_.gain)) {
        throw ConfigError("invalid reference depth parameters");
    }
    const int r = static_cast<int>(std::ceil(3.0 * params_.blur_sigma));
    double sum = 0.0;
    for (int k = -r; k <= r; ++k) {
        const double w = params_.blur_sigma > 0
                             ? std::exp(-0.5 * k * k / (params_.blur_sigma * params_.blur_sigma))
                             : 1.0;
        kernel_.push_back(w);
        sum += w;
    }
    for (double &w : kernel_) w /= sum;
}

DepthMap ReferenceDepthHead::estimate(const Image &rgb) const {
    require_rgb(rgb, id_);
    Image b = blur_pass(blur_pass(luminance(rgb), kernel_, 0), kernel_, 1);
    const double k = params_.gain;
    for (double &v : b.values()) v = params_.base_depth * std::exp(k * v - 0.5 * k);
    return {std::move(b)};
}

void ReferenceDepthHead::backward(const Image &rgb, const Image &grad_depth,
                                  Image &grad_image) const {
    const DepthMap d = estimate(rgb);
    require_same_shape(d.values, grad_depth, "depth backward");
    if (grad_image.empty()) grad_image = Image(rgb.width(), rgb.height(), 3);
    require_same_shape(rgb, grad_image, "depth backward");
    Image g(rgb.width(), rgb.height(), 1);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_depth[i] * d.values[i] * params_.gain;
    const Image gl = blur_pass_transpose(blur_pass_transpose(g, kernel_, 1), kernel_, 0);
    constexpr double kLuma[3] = {0.299, 0.587, 0.114};
    for (std::size_t p = 0; p < gl.size(); ++p)
        for (int ch = 0; ch < 3; ++ch) grad_image[p * 3 + ch] += kLuma[ch] * gl[p];
}

std::unique_ptr<ReferenceDetector> reference_detector(std::uint64_t seed) {
    return std::make_unique<ReferenceDetector>(seed);
}

std::unique_ptr<ReferenceDepthHead> reference_depth_head(std::uint64_t seed) {
    return std::make_unique<ReferenceDepthHead>(seed);
}

// ---------------------------------------------------------------------------
// Subprocess adapters

std::chrono::milliseconds adapter_timeout() {
    if (const char *s = std::getenv("GSATTACK_ADAPTER_TIMEOUT")) {
        char *end = nullptr;
        const double seconds = std::strtod(s, &end);
        if (end != s && seconds > 0) {
            return std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0));
        }
    }
    return std::chrono::seconds(60);
}

namespace {

std::string run_command(const std::string &command, const std::string &input,
                        const std::string &who) {
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0) throw AdapterFailure(who + ": pipe failed");
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw AdapterFailure(who + ": pipe failed");
    }
    const pid_t pid = fork();
    if (pid < 0) throw AdapterFailure(who + ": fork failed");
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    // Requests are a single short line, far below the pipe buffer.
    signal(SIGPIPE, SIG_IGN);
    [[maybe_unused]] const auto written = write(in_pipe[1], input.data(), input.size());
    close(in_pipe[1]);

    std::string output;
    const auto deadline = std::chrono::steady_clock::now() + adapter_timeout();
    bool timed_out = false;
    char buf[4096];
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{out_pipe[0], POLLIN, 0};
        const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0 && errno == EINTR) continue;
        if (ready == 0) {
            timed_out = true;
            break;
        }
        const ssize_t n = read(out_pipe[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    close(out_pipe[0]);
    if (timed_out) kill(pid, SIGKILL);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) throw AdapterFailure(who + ": timed out");
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw AdapterFailure(who + ": command exited with failure");
    }
    return output;
}

class TempFile {
public:
    explicit TempFile(const std::string &suffix) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("gsattack-" + std::to_string(getpid()) + "-" + std::to_string(counter++) + suffix);
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    const std::filesystem::path &path() const { return path_; }

private:
    std::filesystem::path path_;
};

nlohmann::json request(const std::string &command, const std::string &who, const Image &rgb,
                       const std::string &task, const TempFile &file) {
    require_rgb(rgb, who);
    write_pfm(rgb, file.path());
    const nlohmann::json req{{"image_path", file.path().string()},
                             {"task", task},
                             {"width", rgb.width()},
                             {"height", rgb.height()}};
    const std::string out = run_command(command, req.dump() + "\n", who);
    try {
        return nlohmann::json::parse(out);
    } catch (const nlohmann::json::exception &e) {
        throw AdapterFailure(who + ": unparseable response: " + e.what());
    }
}

} // namespace

SubprocessDetector::SubprocessDetector(std::string command, std::string id)
    : command_(std::move(command)), id_(std::move(id)) {}

std::vector<Detection> SubprocessDetector::detect(const Image &rgb) const {
    TempFile file(".pfm");
    const auto resp = request(command_, id_, rgb, "detect", file);
    std::vector<Detection> dets;
    try {
        for (const auto &d : resp.at("detections")) {
            const auto &b = d.at("box");
            Detection det;
            det.box = Box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                          b.at(3).get<double>()}
                          .clipped(rgb.width(), rgb.height());
            det.class_id = d.at("class").get<std::string>();
            det.score = d.at("score").get<double>();
            if (!std::isfinite(det.score)) throw AdapterFailure(id_ + ": non-finite score");
            dets.push_back(std::move(det));
        }
    } catch (const nlohmann::json::exception &e) {
        throw AdapterFailure(id_ + ": malformed detections: " + e.what());
    }
    return dets;
}

SubprocessDepth::SubprocessDepth(std::string command, std::string id)
    : command_(std::move(command)), id_(std::move(id)) {}

DepthMap SubprocessDepth::estimate(const Image &rgb) const {
    TempFile file(".pfm");
    const auto resp = request(command_, id_, rgb, "depth", file);
    std::string path;
    try {
        path = resp.at("depth_path").get<std::string>();
    } catch (const nlohmann::json::exception &e) {
        throw AdapterFailure(id_ + ": malformed depth response: " + e.what());
    }
    Image depth;
    try {
        depth = read_pfm(path);
    } catch (const std::runtime_error &e) {
        throw AdapterFailure(id_ + ": " + e.what());
    }
    if (depth.width() != rgb.width() || depth.height() != rgb.height() || depth.channels() != 1) {
        throw AdapterFailure(id_ + ": depth map shape does not match the input");
    }
    for (double v : depth.values()) {
        if (!std::isfinite(v) || v <= 0) throw AdapterFailure(id_ + ": non-positive depth");
    }
    return {std::move(depth)};
}

namespace {

std::uint64_t parse_seed(const std::string &text, const std::string &spec) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception &) {
    }
    throw ConfigError("bad adapter seed in '" + spec + "'");
}

} // namespace

std::shared_ptr<const Detector> make_detector(const std::string &spec) {
    if (spec.rfind("refdet:", 0) == 0) {
        return std::make_shared<ReferenceDetector>(parse_seed(spec.substr(7), spec));
    }
    if (spec.rfind("subprocess:", 0) == 0) {
        return std::make_shared<SubprocessDetector>(spec.substr(11), spec);
    }
    throw ConfigError("unknown detector '" + spec + "'");
}

std::shared_ptr<const DepthEstimator> make_depth_estimator(const std::string &spec) {
    if (spec.rfind("refdepth:", 0) == 0) {
        return std::make_shared<ReferenceDepthHead>(parse_seed(spec.substr(9), spec));
    }
    if (spec.rfind("subprocess:", 0) == 0) {
        return std::make_shared<SubprocessDepth>(spec.substr(11), spec);
    }
    throw ConfigError("unknown depth estimator '" + spec + "'");
}

} // namespace gsattack
