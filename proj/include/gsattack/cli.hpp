#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsattack/attack.hpp"
#include "gsattack/metrics.hpp"
#include "gsattack/protocol.hpp"
#include "gsattack/toy_scene.hpp"

namespace gsattack {

/// Complete description of one experiment. Every field has a default, and
/// `to_json` emits all of them, so a snapshot is a full record of the run.
struct RunConfig {
    /// PLY path, or "toy" for the built-in vehicle described by `toy`.
    std::string asset = "toy";
    ToySceneSpec toy;
    OrbitSpec views = toy_orbit();

    std::string detector = "refdet:0";
    std::string depth = "refdepth:0";
    /// Model lists of the transfer grid.
    std::vector<std::string> detectors{"refdet:0", "refdet:1", "refdet:2"};
    std::vector<std::string> depths{"refdepth:0", "refdepth:1", "refdepth:2"};
    TransferDirection direction = TransferDirection::DetToDepth;

    AttackConfig attack;
    std::vector<double> betas{0.02, 0.04, 0.06, 0.08, 0.10};
    std::vector<int> signs{+1, -1};
    std::vector<std::uint64_t> sweep_seeds{0, 1, 2};

    std::string gt_class = "car";
    double eval_rho = 0.8;

    std::string out_dir = "runs/latest";
    int image_interval = 50;
    bool verbose = false;
    std::uint64_t seed = 0;

    bool operator==(const RunConfig &) const = default;
};

nlohmann::json to_json(const RunConfig &cfg);
/// Missing keys keep their defaults; unknown keys and bad values throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json &j);
RunConfig load_run_config(const std::filesystem::path &path);

/// Attack settings with the root seed applied.
AttackConfig attack_config(const RunConfig &cfg);
EvalSettings eval_settings(const RunConfig &cfg);
GaussianSet load_asset(const RunConfig &cfg);

nlohmann::json to_json(const ViewEval &v);
ViewEval view_eval_from_json(const nlohmann::json &j);
nlohmann::json to_json(const EvalSummary &s);

// Subcommands. Each writes into cfg.out_dir and returns a process exit code.
int cmd_attack(const RunConfig &cfg);
int cmd_transfer(const RunConfig &cfg);
int cmd_sweep(const RunConfig &cfg);
int cmd_render(const RunConfig &cfg);
/// Rebuilds every summary number from the artifacts of each run directory,
/// prints the tables, and fails when they disagree with the manifests.
int cmd_report(const std::vector<std::filesystem::path> &run_dirs, std::ostream &out);

/// Entry point of the command-line tool.
int run_cli(int argc, char **argv);

} // namespace gsattack
