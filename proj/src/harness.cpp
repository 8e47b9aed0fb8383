#include "juice/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "juice/baselines.hpp"
#include "juice/rng.hpp"

namespace juice {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json settings_to_json(const SolverSettings& s)
{
    const SolverParams& p = s.base;
    return {
        {"beta1_rel", s.beta1_rel},
        {"beta2_rel", s.beta2_rel},
        {"beta3_rel", s.beta3_rel},
        {"rho", p.rho},
        {"eps0", p.eps0},
        {"eps_detect_rel", p.eps_detect_rel},
        {"eps_conv", p.eps_conv},
        {"k_c_max", p.k_c_max},
        {"k_u_max", p.k_u_max},
        {"warmup_iterations", p.warmup_iterations},
        {"inner_period", p.inner_period},
        {"wishart_d", p.wishart_d},
        {"inner_power_factor", p.inner_power_factor},
        {"init", p.init == Initialization::ridge ? "ridge" : "zero"},
    };
}

SolverSettings settings_from_json(const nlohmann::json& j, SolverSettings s)
{
    SolverParams& p = s.base;
    s.beta1_rel = j.value("beta1_rel", s.beta1_rel);
    s.beta2_rel = j.value("beta2_rel", s.beta2_rel);
    s.beta3_rel = j.value("beta3_rel", s.beta3_rel);
    p.rho = j.value("rho", p.rho);
    p.eps0 = j.value("eps0", p.eps0);
    p.eps_detect_rel = j.value("eps_detect_rel", p.eps_detect_rel);
    p.eps_conv = j.value("eps_conv", p.eps_conv);
    p.k_c_max = j.value("k_c_max", p.k_c_max);
    p.k_u_max = j.value("k_u_max", p.k_u_max);
    p.warmup_iterations = j.value("warmup_iterations", p.warmup_iterations);
    p.inner_period = j.value("inner_period", p.inner_period);
    p.wishart_d = j.value("wishart_d", p.wishart_d);
    p.inner_power_factor = j.value("inner_power_factor", p.inner_power_factor);
    if (j.contains("init")) {
        const std::string init = j.at("init").get<std::string>();
        if (init == "ridge")
            p.init = Initialization::ridge;
        else if (init == "zero")
            p.init = Initialization::zero;
        else
            throw ConfigError("config: unknown init '" + init + "'");
    }
    return s;
}

TrialResult score(std::string_view algorithm, const ProblemInstance& inst, const CMatrix& estimate,
                  const UserSet& support, SrrDifference kind)
{
    TrialResult r;
    r.algorithm = std::string(algorithm);
    const NmseAccumulator acc = nmse_accumulate(inst.channels, estimate);
    r.nmse_num = acc.numerator;
    r.nmse_den = acc.denominator;
    // An empty true support has no meaningful SRR; report 1 by convention.
    r.srr = inst.activity.active.empty() ? 1.0 : srr(inst.activity.active, support, kind);
    return r;
}

template <class F>
TrialResult guarded(std::string_view algorithm, F&& body)
{
    try {
        return body();
    } catch (const SolverFault& e) {
        TrialResult r;
        r.algorithm = std::string(algorithm);
        r.failed = true;
        r.error = e.what();
        return r;
    } catch (const DomainError& e) {
        TrialResult r;
        r.algorithm = std::string(algorithm);
        r.failed = true;
        r.error = e.what();
        return r;
    }
}

std::vector<std::string> split(std::string_view line, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

constexpr const char* kCsvHeader = "algorithm,tau_p,trials,nmse,nmse_db,srr,mean_iters,mean_seconds";

} // namespace

SolverParams SolverSettings::resolve(double noise_var, Eigen::Index antennas) const
{
    SolverParams p = base;
    const double sigma = std::sqrt(noise_var);
    p.betas.beta1 = beta1_rel * sigma * std::sqrt(static_cast<double>(antennas));
    p.betas.beta2 = beta2_rel * noise_var;
    p.betas.beta3 = beta3_rel * noise_var;
    return p;
}

double ExperimentConfig::noise_var() const
{
    return noiseless ? 0.0 : std::pow(10.0, -snr_db / 10.0);
}

void ExperimentConfig::validate() const
{
    const SystemConfig& s = system;
    if (s.antennas < 1 || s.users < 1 || s.clusters < 1 || s.active_users < 0)
        throw ConfigError("config: system counts must be positive");
    (void)build_cluster_layout(s.users, s.clusters);
    if (s.active_users > s.users)
        throw ConfigError("config: more active users than users");
    if (s.activity == ActivityKind::clustered && s.active_users > 0) {
        if (s.active_clusters < 1 || s.active_users % s.active_clusters != 0 ||
            s.active_users / s.active_clusters > s.users / s.clusters)
            throw ConfigError("config: infeasible clustered activity");
    }
    if (tau_sweep.empty())
        throw ConfigError("config: tau_p sweep is empty");
    for (Eigen::Index tau : tau_sweep) {
        if (tau < 1)
            throw ConfigError("config: tau_p must be positive");
        if (s.orthonormal_pilots && tau < s.users)
            throw ConfigError("config: orthonormal pilots need tau_p >= users");
    }
    if (trials < 1)
        throw ConfigError("config: at least one trial per point required");
    if (threads < 1)
        throw ConfigError("config: thread count must be positive");
    if (s.zeta < 0.0 || s.zeta > 1.0)
        throw ConfigError("config: zeta must lie in [0, 1]");
    proposed.resolve(noise_var(), s.antennas).validate();
    ir_l21.resolve(noise_var(), s.antennas).validate();
}

ExperimentConfig preset(std::string_view name)
{
    ExperimentConfig c;
    if (name == "desk" || name == "default")
        return c;
    if (name == "paper") {
        c.system.antennas = 20;
        c.system.users = 500;
        c.system.clusters = 20;
        c.system.active_users = 16;
        c.system.active_clusters = 2;
        c.tau_sweep = {20, 30, 40, 50, 60, 70, 80};
        return c;
    }
    throw ConfigError("unknown preset '" + std::string(name) + "'");
}

nlohmann::json to_json(const ExperimentConfig& c)
{
    const SystemConfig& s = c.system;
    nlohmann::json j;
    j["system"] = {
        {"antennas", s.antennas},
        {"users", s.users},
        {"clusters", s.clusters},
        {"active_users", s.active_users},
        {"active_clusters", s.active_clusters},
        {"activity", std::string(to_string(s.activity))},
        {"pilots", s.orthonormal_pilots ? "orthonormal" : "bernoulli"},
    };
    j["channel"] = {
        {"angle_min_deg", s.scattering.angle_min / kDeg},
        {"angle_max_deg", s.scattering.angle_max / kDeg},
        {"angular_std_deg", s.scattering.angular_std / kDeg},
        {"spacing", s.scattering.spacing},
        {"loading", s.scattering.loading},
        {"zeta", s.zeta},
    };
    j["noise"] = {{"snr_db", c.snr_db}, {"noiseless", c.noiseless}};
    j["sweep"] = {{"tau_p", c.tau_sweep}};
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["output"] = c.output;
    j["record_timing"] = c.record_timing;
    j["srr_difference"] = c.srr_difference == SrrDifference::symmetric ? "symmetric" : "one_sided";
    j["algorithms"] = {{std::string(kProposed), settings_to_json(c.proposed)},
                       {std::string(kIrL21), settings_to_json(c.ir_l21)}};
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c)
{
    try {
        if (j.contains("system")) {
            const auto& s = j.at("system");
            SystemConfig& sys = c.system;
            sys.antennas = s.value("antennas", sys.antennas);
            sys.users = s.value("users", sys.users);
            sys.clusters = s.value("clusters", sys.clusters);
            sys.active_users = s.value("active_users", sys.active_users);
            sys.active_clusters = s.value("active_clusters", sys.active_clusters);
            if (s.contains("activity"))
                sys.activity = parse_activity_kind(s.at("activity").get<std::string>());
            if (s.contains("pilots")) {
                const std::string p = s.at("pilots").get<std::string>();
                if (p != "orthonormal" && p != "bernoulli")
                    throw ConfigError("config: unknown pilot kind '" + p + "'");
                sys.orthonormal_pilots = p == "orthonormal";
            }
        }
        if (j.contains("channel")) {
            const auto& ch = j.at("channel");
            ScatteringParams& sc = c.system.scattering;
            sc.angle_min = ch.value("angle_min_deg", sc.angle_min / kDeg) * kDeg;
            sc.angle_max = ch.value("angle_max_deg", sc.angle_max / kDeg) * kDeg;
            sc.angular_std = ch.value("angular_std_deg", sc.angular_std / kDeg) * kDeg;
            sc.spacing = ch.value("spacing", sc.spacing);
            sc.loading = ch.value("loading", sc.loading);
            c.system.zeta = ch.value("zeta", c.system.zeta);
        }
        if (j.contains("noise")) {
            c.snr_db = j.at("noise").value("snr_db", c.snr_db);
            c.noiseless = j.at("noise").value("noiseless", c.noiseless);
        }
        if (j.contains("sweep"))
            c.tau_sweep = j.at("sweep").at("tau_p").get<std::vector<Eigen::Index>>();
        c.trials = j.value("trials", c.trials);
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", c.threads);
        c.output = j.value("output", c.output);
        c.record_timing = j.value("record_timing", c.record_timing);
        if (j.contains("srr_difference")) {
            const std::string d = j.at("srr_difference").get<std::string>();
            if (d != "symmetric" && d != "one_sided")
                throw ConfigError("config: unknown srr_difference '" + d + "'");
            c.srr_difference = d == "symmetric" ? SrrDifference::symmetric : SrrDifference::one_sided;
        }
        if (j.contains("algorithms")) {
            const auto& a = j.at("algorithms");
            if (a.contains(kProposed))
                c.proposed = settings_from_json(a.at(std::string(kProposed)), c.proposed);
            if (a.contains(kIrL21))
                c.ir_l21 = settings_from_json(a.at(std::string(kIrL21)), c.ir_l21);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, std::move(base));
}

std::uint64_t trial_seed(std::uint64_t master, Eigen::Index tau_p, int trial)
{
    return derive_seed(derive_seed(master, static_cast<std::uint64_t>(tau_p)),
                       static_cast<std::uint64_t>(trial));
}

std::vector<TrialResult> run_trial(const ExperimentConfig& config, Eigen::Index tau_p,
                                   std::uint64_t seed, int trial_index)
{
    SystemConfig system = config.system;
    system.pilot_length = tau_p;
    system.noise_var = config.noise_var();
    const ProblemInstance inst = generate_instance(system, seed);
    const Eigen::Index m = system.antennas;

    std::vector<TrialResult> out;
    out.push_back(guarded(kProposed, [&] {
        const JuiceSolution sol = solve(inst.received, inst.pilots, inst.layout, inst.prior_guess,
                                        inst.stats.powers, config.proposed.resolve(system.noise_var, m));
        TrialResult r = score(kProposed, inst, sol.channels, sol.support, config.srr_difference);
        r.seconds = sol.seconds;
        r.iterations = sol.total_iterations;
        return r;
    }));
    out.push_back(guarded(kIrL21, [&] {
        const JuiceSolution sol =
            ir_l21_admm(inst.received, inst.pilots, config.ir_l21.resolve(system.noise_var, m));
        TrialResult r = score(kIrL21, inst, sol.channels, sol.support, config.srr_difference);
        r.seconds = sol.seconds;
        r.iterations = sol.total_iterations;
        return r;
    }));
    out.push_back(guarded(kOracle, [&] {
        const auto start = std::chrono::steady_clock::now();
        const CMatrix est = oracle_mmse(inst.received, inst.pilots, make_oracle_info(inst));
        TrialResult r = score(kOracle, inst, est, inst.activity.active, config.srr_difference);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return r;
    }));
    for (TrialResult& r : out) {
        r.tau_p = tau_p;
        r.trial = trial_index;
        r.trial_seed = seed;
    }
    return out;
}

std::vector<ResultRow> aggregate(const std::vector<TrialResult>& trials,
                                 const std::vector<Eigen::Index>& tau_sweep, bool record_timing)
{
    struct Acc {
        NmseAccumulator nmse;
        double srr = 0.0;
        double iters = 0.0;
        double seconds = 0.0;
        int count = 0;
    };
    const std::vector<std::string_view> algorithms{kProposed, kIrL21, kOracle};
    std::map<std::pair<std::string, Eigen::Index>, Acc> acc;
    for (const TrialResult& t : trials) {
        if (t.failed)
            continue;
        Acc& a = acc[{t.algorithm, t.tau_p}];
        if (t.nmse_den > 0.0) {
            a.nmse.numerator += t.nmse_num;
            a.nmse.denominator += t.nmse_den;
            ++a.nmse.trials;
        }
        a.srr += t.srr;
        a.iters += t.iterations;
        a.seconds += t.seconds;
        ++a.count;
    }

    std::vector<ResultRow> rows;
    for (Eigen::Index tau : tau_sweep) {
        for (std::string_view alg : algorithms) {
            const auto it = acc.find({std::string(alg), tau});
            if (it == acc.end())
                continue;
            const Acc& a = it->second;
            ResultRow row;
            row.algorithm = std::string(alg);
            row.tau_p = tau;
            row.trials = a.count;
            row.nmse = a.nmse.denominator > 0.0 ? a.nmse.value() : 0.0;
            row.nmse_db = to_db(row.nmse);
            row.srr = a.srr / a.count;
            row.mean_iters = a.iters / a.count;
            row.mean_seconds = record_timing ? a.seconds / a.count : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config)
{
    config.validate();
    const std::size_t per_point = static_cast<std::size_t>(config.trials);
    const std::size_t items = config.tau_sweep.size() * per_point;
    std::vector<std::vector<TrialResult>> slots(items);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= items)
                return;
            const Eigen::Index tau = config.tau_sweep[k / per_point];
            const int trial = static_cast<int>(k % per_point);
            slots[k] = run_trial(config, tau, trial_seed(config.seed, tau, trial), trial);
        }
    };
    const int n_threads = std::min<int>(config.threads, static_cast<int>(items));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
    }

    ExperimentResult result;
    for (auto& slot : slots)
        for (TrialResult& t : slot) {
            result.failures += t.failed ? 1 : 0;
            result.trials.push_back(std::move(t));
        }
    result.rows = aggregate(result.trials, config.tau_sweep, config.record_timing);
    return result;
}

std::string results_csv(const std::vector<ResultRow>& rows)
{
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const ResultRow& r : rows)
        out << r.algorithm << ',' << r.tau_p << ',' << r.trials << ',' << format_double(r.nmse) << ','
            << format_double(r.nmse_db) << ',' << format_double(r.srr) << ','
            << format_double(r.mean_iters) << ',' << format_double(r.mean_seconds) << '\n';
    return out.str();
}

std::vector<ResultRow> parse_results_csv(std::string_view text)
{
    std::vector<ResultRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw ConfigError("results CSV: unexpected header");
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto f = split(line, ',');
        if (f.size() != 8)
            throw ConfigError("results CSV: expected 8 fields in '" + line + "'");
        ResultRow r;
        r.algorithm = f[0];
        r.tau_p = std::stoll(f[1]);
        r.trials = std::stoi(f[2]);
        r.nmse = std::stod(f[3]);
        r.nmse_db = std::stod(f[4]);
        r.srr = std::stod(f[5]);
        r.mean_iters = std::stod(f[6]);
        r.mean_seconds = std::stod(f[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void emit_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                  const ExperimentConfig& config, int failures)
{
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write results to " + path.string());
        out << results_csv(rows);
        if (!out)
            throw std::runtime_error("write failed for " + path.string());
    }
    std::filesystem::path sidecar = path;
    sidecar += ".json";
    std::ofstream meta(sidecar, std::ios::binary);
    if (!meta)
        throw std::runtime_error("cannot write metadata to " + sidecar.string());
    nlohmann::json j;
    j["config"] = to_json(config);
    j["seed"] = config.seed;
    j["noise_var"] = config.noise_var();
    j["failures"] = failures;
    j["trial_seed_scheme"] = "derive_seed(derive_seed(seed, tau_p), trial), splitmix64";
    meta << j.dump(2) << '\n';
}

} // namespace juice
