#pragma once

// Command-line front end: simulate, train, estimate, abc, evaluate,
// criticize and report.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "deepbf/abc.hpp"
#include "deepbf/checkpoint.hpp"
#include "deepbf/estimator.hpp"
#include "deepbf/models.hpp"

namespace deepbf::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kNumeric = 3 };

struct RunConfig {
    std::string pair_name = "data1";
    Hyperparams hyperparams;
    double prior_m1 = 0.5;
    std::size_t n = 2;
    std::uint64_t seed = 0;
    TrainConfig train;
    AbcConfig abc;
    std::size_t eval_t0 = 1500;
    std::size_t eval_grid_points = 512;
    std::size_t criticize_replicates = 1000;
    std::string criticize_model = "m2";
    std::size_t simulate_count = 100;
    std::string simulate_model = "m1";
    std::string output_dir = ".";

    /// Fully expanded form, defaults included; its hash identifies a run.
    Json to_json() const;
    ModelPair make_pair() const;
};

/// Strict parse: unknown keys and ill-typed values raise ConfigError.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::string& path);

/// Runs one subcommand; args[0] is the program name. Diagnostics go to
/// standard error.
int run_command(const std::vector<std::string>& args);

} // namespace deepbf::cli
