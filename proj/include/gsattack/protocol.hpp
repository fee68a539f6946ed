#pragma once

#include <string>
#include <vector>

#include "gsattack/attack.hpp"
#include "gsattack/metrics.hpp"

namespace gsattack {

enum class TransferDirection { DetToDepth, DepthToDet };

std::string to_string(TransferDirection d);
TransferDirection transfer_direction_from_string(const std::string &s);

struct TransferCell {
    std::string proxy;
    std::string target;
    double tnr = 0.0; // fraction; TNR_depth for Det->Depth, TNR_det for Depth->Det
    TransferDirection direction = TransferDirection::DetToDepth;
    std::vector<ViewEval> evals; // per-view records behind `tnr`, when the cell was run
};

struct TransferGrid {
    TransferDirection direction = TransferDirection::DetToDepth;
    std::vector<std::string> proxies;
    std::vector<std::string> targets;
    std::vector<std::vector<TransferCell>> cells; // [proxy][target]
    std::vector<double> row_means;
    std::vector<double> col_means;
    double overall_mean = 0.0;
};

/// Row, column and overall arithmetic means of a rectangular value grid.
void fill_grid_means(TransferGrid &grid);
TransferGrid grid_from_values(const std::vector<std::vector<double>> &values,
                              std::vector<std::string> proxies, std::vector<std::string> targets,
                              TransferDirection direction);

struct TransferSetup {
    GaussianSet baseline;
    ViewSet views;
    AttackConfig base;
    /// Detector building the ROIs of depth-only proxy runs.
    std::shared_ptr<const Detector> roi_detector;
    /// Depth model slot filled in for det-only proxy runs (never evaluated there).
    std::shared_ptr<const DepthEstimator> idle_depth;
    EvalSettings eval;
};

/// One single-task attack per proxy, then every target evaluated on the same
/// adversarial set. Det->Depth: proxies are detectors, targets depth models,
/// cells hold TNR_depth. Depth->Det: the converse with TNR_det.
TransferGrid run_transfer_grid(const std::vector<std::shared_ptr<const Detector>> &detectors,
                               const std::vector<std::shared_ptr<const DepthEstimator>> &depths,
                               TransferDirection direction, const TransferSetup &setup);

struct DoseRow {
    int sign = +1;
    double beta = 0.0;
    double commanded = 0.0;      // sign * beta
    double mean_delta_sigma = 0.0;
    double ci_low = 0.0;         // normal-approximation 95% interval
    double ci_high = 0.0;
    std::vector<double> samples; // per (seed, view)
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LineFit fit_line(const std::vector<double> &x, const std::vector<double> &y);

struct DoseResponse {
    std::vector<DoseRow> rows;
    LineFit fit; // mean delta-sigma vs commanded target
};

struct SweepSetup {
    GaussianSet baseline;
    ViewSet views;
    AttackConfig base; // protocol is forced to depth_only
    AttackModels models;
    std::vector<double> betas;
    std::vector<int> signs{+1, -1};
    std::vector<std::uint64_t> seeds{0, 1, 2};
};

/// Depth-only attacks for every (sign, beta, seed). Each seed rotates the
/// view set about the world z axis by an angle drawn from the "sweep"
/// substream and reseeds the attack.
DoseResponse dose_response_sweep(const SweepSetup &setup);

/// Row statistics and line fit rebuilt from the (sign, beta, samples) of each row.
DoseResponse dose_from_samples(std::vector<DoseRow> rows);

/// Population variance of delta-sigma across the EOT draws of `cfg`
/// (step 0), each applied to every adversarial render before depth
/// estimation. Delta-sigma of one draw is the mean over views with a
/// nonempty ROI.
double var_eot_delta_sigma(const GaussianSet &g_adv, const ViewSet &views, const CleanCache &cache,
                           const EotConfig &cfg, const DepthEstimator &depth, double eps,
                           const RenderSettings &render = {});

/// Markdown renderings used by the CLI reports.
std::string format_grid_markdown(const TransferGrid &grid);
std::string format_grid_csv(const TransferGrid &grid);
std::string format_dose_csv(const DoseResponse &dose);

} // namespace gsattack
