#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "juice/metrics.hpp"
#include "juice/model.hpp"
#include "juice/solver.hpp"

namespace juice {

/// Solver settings with the prior weights expressed relative to the noise
/// level: beta1 = beta1_rel * sigma * sqrt(M), beta2,3 = beta2,3_rel * sigma^2.
struct SolverSettings {
    double beta1_rel = 0.75;
    double beta2_rel = 0.1;
    double beta3_rel = 0.1;
    SolverParams base;

    SolverParams resolve(double noise_var, Eigen::Index antennas) const;
};

inline constexpr std::string_view kProposed = "proposed";
inline constexpr std::string_view kIrL21 = "ir_l21";
inline constexpr std::string_view kOracle = "oracle_mmse";

struct ExperimentConfig {
    SystemConfig system;        // pilot_length is overridden by the sweep
    double snr_db = 10.0;
    bool noiseless = false;
    std::vector<Eigen::Index> tau_sweep{10, 20, 30, 40, 50};
    int trials = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string output = "results.csv";
    bool record_timing = false;
    SrrDifference srr_difference = SrrDifference::symmetric;
    SolverSettings proposed;
    SolverSettings ir_l21{0.5};

    double noise_var() const;
    void validate() const;
};

/// Named presets: "desk" (default, small) and "paper" (M=20, N=500, C=20, K=16).
ExperimentConfig preset(std::string_view name);

nlohmann::json to_json(const ExperimentConfig& config);
/// Fields absent from `j` keep the values of `base`.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

struct TrialResult {
    std::string algorithm;
    Eigen::Index tau_p = 0;
    int trial = 0;
    std::uint64_t trial_seed = 0;
    double nmse_num = 0.0;
    double nmse_den = 0.0;
    double srr = 0.0;
    double seconds = 0.0;
    int iterations = 0;
    bool failed = false;
    std::string error;
};

/// Seed of trial `trial` at pilot length `tau_p`: a pure function of the
/// master seed, so results do not depend on scheduling.
std::uint64_t trial_seed(std::uint64_t master, Eigen::Index tau_p, int trial);

/// One instance, three estimators (proposed, IR-l2,1, oracle MMSE).
std::vector<TrialResult> run_trial(const ExperimentConfig& config, Eigen::Index tau_p,
                                   std::uint64_t seed, int trial_index = 0);

struct ResultRow {
    std::string algorithm;
    Eigen::Index tau_p = 0;
    int trials = 0;
    double nmse = 0.0;
    double nmse_db = 0.0;
    double srr = 0.0;
    double mean_iters = 0.0;
    double mean_seconds = 0.0;

    bool operator==(const ResultRow&) const = default;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<TrialResult> trials;  // ordered by (tau_p index, trial, algorithm)
    int failures = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Aggregates NMSE as a ratio of sums and SRR as a mean, per (algorithm, tau_p).
std::vector<ResultRow> aggregate(const std::vector<TrialResult>& trials,
                                 const std::vector<Eigen::Index>& tau_sweep, bool record_timing);

std::string results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(std::string_view text);

/// Writes `path` (CSV) and `path` + ".json" (resolved config, seed, failure count).
void emit_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                  const ExperimentConfig& config, int failures = 0);

} // namespace juice
