#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsattack/image.hpp"

namespace gsattack {

/// Axis-aligned pixel box, x1 < x2 and y1 < y2 for valid boxes.
struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
    Box clipped(int image_width, int image_height) const;

    bool operator==(const Box &) const = default;
};

double iou(const Box &a, const Box &b);

struct Detection {
    Box box;
    std::string class_id;
    double score = 0.0;
    /// Model-specific handle of the score's source (peak cell for the
    /// reference detector, -1 for non-differentiable adapters).
    int anchor = -1;

    bool operator==(const Detection &) const = default;
};

struct DepthMap {
    Image values; // H x W x 1, strictly positive
};

using ClassSet = std::vector<std::string>;

ClassSet default_target_classes();

/// Frozen detector contract. Scores are differentiable w.r.t. the image for
/// adapters reporting `differentiable()`; boxes never are.
class Detector {
public:
    virtual ~Detector() = default;

    virtual const std::string &id() const = 0;
    virtual std::vector<Detection> detect(const Image &rgb) const = 0;

    virtual bool differentiable() const { return false; }
    /// grad_image += sum_k weights[k] * d(dets[k].score)/d(rgb).
    virtual void score_backward(const Image &rgb, std::span<const Detection> dets,
                                std::span<const double> weights, Image &grad_image) const;
    virtual bool thread_safe() const { return true; }
};

/// Frozen monocular depth contract.
class DepthEstimator {
public:
    virtual ~DepthEstimator() = default;

    virtual const std::string &id() const = 0;
    virtual DepthMap estimate(const Image &rgb) const = 0;

    virtual bool differentiable() const { return false; }
    /// grad_image += (d depth / d rgb)^T grad_depth.
    virtual void backward(const Image &rgb, const Image &grad_depth, Image &grad_image) const;
    virtual bool thread_safe() const { return true; }
};

struct TargetConfidence {
    double value = 0.0;
    int index = -1; // detection carrying the max, -1 when none qualifies
};

/// Max score over detections whose class is in `classes`; 0 when none.
TargetConfidence max_target_confidence(std::span<const Detection> dets, const ClassSet &classes);

// ---------------------------------------------------------------------------
// Built-in reference models

struct ReferenceDetectorOptions {
    int grid = 32;        // input is box-pooled to grid x grid cells
    int window_w = 17;    // template window, in cells
    int window_h = 13;
    int object_w = 13;    // object rectangle centred in the window
    int object_h = 9;
    int bands = 9;        // horizontal color bands inside the object
    double gain = 10.0;
    double bias = 6.0;
    double threshold = 0.30;
    double nms_iou = 0.45; // class-agnostic suppression of overlapping boxes
    std::vector<std::string> classes{"car", "truck", "bus", "person", "bicycle"};
};

/// Template-matching detector: per class, a seeded banded template is
/// correlated (zero-mean per channel, normalized to 1 on the template
/// itself) against the pooled image and squashed through a sigmoid.
/// Each 4-connected component of the thresholded score map becomes one
/// detection whose box is the template's object rectangle at the peak;
/// overlapping boxes are then suppressed across classes.
class ReferenceDetector final : public Detector {
public:
    explicit ReferenceDetector(std::uint64_t seed, ReferenceDetectorOptions options = {});

    const std::string &id() const override { return id_; }
    std::vector<Detection> detect(const Image &rgb) const override;
    bool differentiable() const override { return true; }
    void score_backward(const Image &rgb, std::span<const Detection> dets,
                        std::span<const double> weights, Image &grad_image) const override;

    const ReferenceDetectorOptions &options() const { return options_; }
    /// Band colors of a class template, `bands` rows of RGB.
    const std::vector<Eigen::Vector3d> &band_colors(const std::string &class_id) const;
    /// Renders the template of `class_id` centred into a width x height image
    /// filled with mid-gray.
    Image template_image(const std::string &class_id, int width, int height) const;

    /// Score maps per class (grid coordinates of the window's top-left cell).
    std::vector<Image> score_maps(const Image &rgb) const;

private:
    struct Template {
        std::vector<Eigen::Vector3d> bands;
        std::vector<double> weights; // window_h x window_w x 3, zero mean per channel
        double norm = 1.0;           // sum of squared weights
    };

    Image pool(const Image &rgb) const;
    double template_value(const Template &t, int u, int v, int ch) const;
    int class_index(const std::string &class_id) const;

    std::string id_;
    ReferenceDetectorOptions options_;
    std::vector<Template> templates_;
};

struct ReferenceDepthParams {
    double base_depth = 4.0; // output at mid-gray luminance
    double gain = 2.0;       // k: brighter -> farther when positive
    double blur_sigma = 1.5; // pixels

    bool operator==(const ReferenceDepthParams &) const = default;
};

/// d(x) = base * exp(k * blur(luma(I))(x) - k/2), separable Gaussian blur
/// with edge replication.
class ReferenceDepthHead final : public DepthEstimator {
public:
    explicit ReferenceDepthHead(std::uint64_t seed);
    ReferenceDepthHead(ReferenceDepthParams params, std::string id);

    const std::string &id() const override { return id_; }
    DepthMap estimate(const Image &rgb) const override;
    bool differentiable() const override { return true; }
    void backward(const Image &rgb, const Image &grad_depth, Image &grad_image) const override;

    const ReferenceDepthParams &params() const { return params_; }

private:
    std::string id_;
    ReferenceDepthParams params_;
    std::vector<double> kernel_; // symmetric, normalized, radius = ceil(3 sigma)
};

std::unique_ptr<ReferenceDetector> reference_detector(std::uint64_t seed);
std::unique_ptr<ReferenceDepthHead> reference_depth_head(std::uint64_t seed);

// ---------------------------------------------------------------------------
// Subprocess adapters (evaluation only, no gradients)
//
// The command is run through /bin/sh once per call. It receives one JSON
// line on stdin: {"image_path": "<rgb .pfm>", "task": "detect"|"depth",
// "width": W, "height": H}. It must answer on stdout with
//   {"detections": [{"box": [x1,y1,x2,y2], "class": "car", "score": 0.9}, ...]}
// or
//   {"depth_path": "<single-channel .pfm>"}.
// The timeout comes from GSATTACK_ADAPTER_TIMEOUT (seconds, default 60).

std::chrono::milliseconds adapter_timeout();

class SubprocessDetector final : public Detector {
public:
    SubprocessDetector(std::string command, std::string id);
    const std::string &id() const override { return id_; }
    std::vector<Detection> detect(const Image &rgb) const override;

private:
    std::string command_;
    std::string id_;
};

class SubprocessDepth final : public DepthEstimator {
public:
    SubprocessDepth(std::string command, std::string id);
    const std::string &id() const override { return id_; }
    DepthMap estimate(const Image &rgb) const override;

private:
    std::string command_;
    std::string id_;
};

/// Adapter ids: "refdet:<seed>", "refdepth:<seed>", "subprocess:<command>".
std::shared_ptr<const Detector> make_detector(const std::string &spec);
std::shared_ptr<const DepthEstimator> make_depth_estimator(const std::string &spec);

/// Serializes calls to adapters that are not thread safe.
class AdapterGate {
public:
    template <class F>
    auto run(bool thread_safe, F &&f) const {
        if (thread_safe) return f();
        std::lock_guard lock(mutex_);
        return f();
    }

private:
    mutable std::mutex mutex_;
};

} // namespace gsattack
