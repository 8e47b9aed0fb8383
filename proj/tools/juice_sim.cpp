// juice_sim: Monte-Carlo driver for the JUICE estimator and its baselines.
//
//   juice_sim run      --preset desk --out results.csv
//   juice_sim trial    --seed 7 --tau 20 --out trial   (diagnostics + instance dump)
//   juice_sim validate --seed 1

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "juice/baselines.hpp"
#include "juice/check/validation.hpp"
#include "juice/harness.hpp"
#include "juice/instance_io.hpp"
#include "juice/metrics.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string preset_name = "desk";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> activity;
    std::optional<double> snr_db;
    std::string out;
};

void add_common(CLI::App* app, CommonOptions& o)
{
    app->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_option("--preset", o.preset_name, "desk | paper")->capture_default_str();
    app->add_option("--seed", o.seed, "master seed");
    app->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    app->add_option("--activity", o.activity, "clustered | random")
        ->check(CLI::IsMember({"clustered", "random"}));
    app->add_option("--snr-db", o.snr_db, "SNR in dB");
}

juice::ExperimentConfig resolve(const CommonOptions& o)
{
    juice::ExperimentConfig c = juice::preset(o.preset_name);
    if (!o.config_path.empty())
        c = juice::load_config(o.config_path, c);
    if (o.seed)
        c.seed = *o.seed;
    if (o.threads)
        c.threads = *o.threads;
    if (o.activity)
        c.system.activity = juice::parse_activity_kind(*o.activity);
    if (o.snr_db) {
        c.snr_db = *o.snr_db;
        c.noiseless = false;
    }
    if (!o.out.empty())
        c.output = o.out;
    c.validate();
    return c;
}

int cmd_run(const CommonOptions& o)
{
    const juice::ExperimentConfig c = resolve(o);
    const juice::ExperimentResult res = juice::run_experiment(c);
    juice::emit_results(res.rows, c.output, c, res.failures);
    std::cout << juice::results_csv(res.rows);
    if (res.failures > 0)
        std::cerr << res.failures << " trial(s) failed\n";
    return 0;
}

const char* stage_name(juice::Stage s)
{
    return s == juice::Stage::outer ? "outer" : "inner";
}

int cmd_trial(const CommonOptions& o, Eigen::Index tau, int trial_index)
{
    juice::ExperimentConfig c = resolve(o);
    const std::string prefix = o.out.empty() ? "trial" : o.out;
    juice::SystemConfig system = c.system;
    system.pilot_length = tau;
    system.noise_var = c.noise_var();
    const std::uint64_t seed = juice::trial_seed(c.seed, tau, trial_index);
    const juice::ProblemInstance inst = juice::generate_instance(system, seed);
    juice::save_instance(inst, prefix + "_instance.json");

    juice::SolverParams params = c.proposed.resolve(system.noise_var, system.antennas);
    params.record_diagnostics = true;
    const juice::JuiceSolution sol =
        juice::solve(inst.received, inst.pilots, inst.layout, inst.prior_guess, inst.stats.powers, params);

    std::ofstream diag(prefix + "_diagnostics.csv");
    diag << "iteration,stage,objective,residual_z,residual_v,change,detected\n";
    char buf[256];
    for (const juice::IterationRecord& r : sol.diagnostics) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g,%ld\n", r.iteration,
                      stage_name(r.stage), r.objective, r.residual_z, r.residual_v, r.change,
                      static_cast<long>(r.detected));
        diag << buf;
    }

    for (const juice::TrialResult& r : juice::run_trial(c, tau, seed, trial_index)) {
        if (r.failed) {
            std::printf("%-12s failed: %s\n", r.algorithm.c_str(), r.error.c_str());
            continue;
        }
        std::printf("%-12s nmse_db=%8.3f srr=%.3f iters=%d\n", r.algorithm.c_str(),
                    juice::to_db(r.nmse_num / r.nmse_den), r.srr, r.iterations);
    }
    std::printf("wrote %s_instance.json and %s_diagnostics.csv (%zu iterations, converged=%d)\n",
                prefix.c_str(), prefix.c_str(), sol.diagnostics.size(), sol.converged ? 1 : 0);
    return 0;
}

int cmd_validate(const CommonOptions& o, int scale)
{
    const std::uint64_t seed = o.seed.value_or(1);
    bool ok = true;
    for (const juice::check::CheckReport& r : juice::check::run_validation_suite(seed, scale)) {
        std::cout << juice::check::format_report(r) << '\n';
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"JUICE joint activity detection and channel estimation simulator"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    CLI::App* run = app.add_subcommand("run", "Monte-Carlo sweep over pilot lengths");
    add_common(run, run_opts);
    run->add_option("--out", run_opts.out, "output CSV (a .json sidecar is written next to it)");

    CommonOptions trial_opts;
    Eigen::Index tau = 20;
    int trial_index = 0;
    CLI::App* trial = app.add_subcommand("trial", "single instance with per-iteration diagnostics");
    add_common(trial, trial_opts);
    trial->add_option("--out", trial_opts.out, "output prefix");
    trial->add_option("--tau", tau, "pilot length")->check(CLI::PositiveNumber)->capture_default_str();
    trial->add_option("--trial", trial_index, "trial index within the seed stream")->capture_default_str();

    CommonOptions val_opts;
    int scale = 1;
    CLI::App* validate = app.add_subcommand("validate", "randomized checks of the solver updates");
    add_common(validate, val_opts);
    validate->add_option("--scale", scale, "multiplier on the number of random cases")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed())
            return cmd_run(run_opts);
        if (trial->parsed())
            return cmd_trial(trial_opts, tau, trial_index);
        return cmd_validate(val_opts, scale);
    } catch (const std::exception& e) {
        std::cerr << "juice_sim: " << e.what() << '\n';
        return 2;
    }
}
