#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "juice/harness.hpp"

using namespace juice;

namespace {

ExperimentConfig tiny()
{
    ExperimentConfig c = preset("desk");
    c.system.users = 20;
    c.system.clusters = 4;
    c.system.antennas = 4;
    c.system.active_users = 4;
    c.tau_sweep = {8, 12};
    c.trials = 3;
    c.proposed.base.k_c_max = 60;
    c.proposed.base.k_u_max = 10;
    return c;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("presets and validation")
{
    const ExperimentConfig desk = preset("desk");
    CHECK(desk.system.antennas == 8);
    CHECK(desk.system.users == 100);
    CHECK(desk.system.clusters == 10);
    CHECK(desk.system.active_users == 8);
    CHECK(desk.tau_sweep == std::vector<Eigen::Index>{10, 20, 30, 40, 50});
    CHECK(desk.noise_var() == doctest::Approx(0.1));

    const ExperimentConfig full = preset("paper");
    CHECK(full.system.antennas == 20);
    CHECK(full.system.users == 500);
    CHECK(full.system.clusters == 20);
    CHECK(full.system.active_users == 16);
    CHECK_NOTHROW(full.validate());
    CHECK_THROWS_AS(preset("huge"), ConfigError);

    ExperimentConfig bad = desk;
    bad.tau_sweep.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = desk;
    bad.trials = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = desk;
    bad.system.clusters = 7;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    // noise-relative prior weights reproduce the nominal values at 10 dB
    const SolverParams p = desk.proposed.resolve(desk.noise_var(), 8);
    CHECK(p.betas.beta2 == doctest::Approx(1e-2));
    CHECK(p.betas.beta3 == doctest::Approx(1e-2));
}

TEST_CASE("config JSON round trip and overrides")
{
    ExperimentConfig c = tiny();
    c.snr_db = 7.5;
    c.seed = 123456789012345ULL;
    c.system.activity = ActivityKind::random;
    c.proposed.beta1_rel = 0.9;
    c.ir_l21.base.rho = 2.0;
    c.proposed.base.init = Initialization::ridge;
    const ExperimentConfig back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.seed == c.seed);
    CHECK(back.system.activity == ActivityKind::random);

    const nlohmann::json partial = nlohmann::json::parse(R"({"trials": 7, "sweep": {"tau_p": [5]}})");
    const ExperimentConfig merged = config_from_json(partial, c);
    CHECK(merged.trials == 7);
    CHECK(merged.tau_sweep == std::vector<Eigen::Index>{5});
    CHECK(merged.snr_db == 7.5);

    CHECK_THROWS(config_from_json(nlohmann::json::parse(R"({"system": {"activity": "bursty"}})")));
}

TEST_CASE("trial with no active users")
{
    ExperimentConfig c = tiny();
    c.system.active_users = 0;
    for (const TrialResult& r : run_trial(c, 8, 42)) {
        CAPTURE(r.algorithm);
        CHECK_FALSE(r.failed);
        CHECK(r.srr == 1.0);
        CHECK(r.nmse_num == 0.0);
        CHECK(r.nmse_den == 0.0);
    }
    c.tau_sweep = {8};
    c.trials = 2;
    const ExperimentResult res = run_experiment(c);
    REQUIRE(res.rows.size() == 3);
    for (const ResultRow& row : res.rows)
        CHECK(row.srr == 1.0);
}

TEST_CASE("trials are reproducible")
{
    const ExperimentConfig c = tiny();
    const auto a = run_trial(c, 12, trial_seed(c.seed, 12, 1), 1);
    const auto b = run_trial(c, 12, trial_seed(c.seed, 12, 1), 1);
    REQUIRE(a.size() == 3);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].algorithm == b[k].algorithm);
        CHECK(a[k].nmse_num == b[k].nmse_num);
        CHECK(a[k].nmse_den == b[k].nmse_den);
        CHECK(a[k].srr == b[k].srr);
        CHECK(a[k].iterations == b[k].iterations);
    }
    CHECK(trial_seed(1, 10, 0) != trial_seed(1, 10, 1));
    CHECK(trial_seed(1, 10, 0) != trial_seed(1, 20, 0));
    CHECK(trial_seed(1, 10, 0) != trial_seed(2, 10, 0));
}

TEST_CASE("experiment table")
{
    ExperimentConfig c = tiny();
    c.tau_sweep = {10};
    c.trials = 1;
    const ExperimentResult one = run_experiment(c);
    REQUIRE(one.rows.size() == 3);
    CHECK(one.rows[0].algorithm == "proposed");
    CHECK(one.rows[1].algorithm == "ir_l21");
    CHECK(one.rows[2].algorithm == "oracle_mmse");

    c = tiny();
    c.threads = 1;
    const std::string serial = results_csv(run_experiment(c).rows);
    c.threads = 3;
    const std::string parallel = results_csv(run_experiment(c).rows);
    CHECK(serial == parallel);
}

TEST_CASE("aggregation is a ratio of sums")
{
    std::vector<TrialResult> t(3);
    for (auto& r : t) {
        r.algorithm = "ir_l21";
        r.tau_p = 10;
    }
    t[0].nmse_num = 1.0;
    t[0].nmse_den = 2.0;
    t[0].srr = 0.5;
    t[1].nmse_num = 3.0;
    t[1].nmse_den = 2.0;
    t[1].srr = 1.0;
    t[2].failed = true;
    const auto rows = aggregate(t, {10}, false);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].nmse == doctest::Approx(1.0));
    CHECK(rows[0].srr == doctest::Approx(0.75));
    CHECK(rows[0].trials == 2);
}

TEST_CASE("results CSV")
{
    CHECK(results_csv({}) == "algorithm,tau_p,trials,nmse,nmse_db,srr,mean_iters,mean_seconds\n");
    CHECK(parse_results_csv(results_csv({})).empty());

    ResultRow r{"proposed", 30, 200, 0.01, -20.0, 0.9123456789012345, 1200.5, 0.0};
    ResultRow s{"oracle_mmse", 40, 200, 1.0 / 3.0, to_db(1.0 / 3.0), 1.0, 0.0, 0.125};
    const std::vector<ResultRow> rows{r, s};
    CHECK(parse_results_csv(results_csv(rows)) == rows);
    CHECK_THROWS_AS(parse_results_csv("bogus\n"), ConfigError);

    const auto dir = std::filesystem::temp_directory_path() / "juice_harness_test";
    std::filesystem::create_directories(dir);
    const ExperimentConfig c = tiny();
    emit_results(rows, dir / "r.csv", c, 2);
    CHECK(slurp(dir / "r.csv") == results_csv(rows));
    const nlohmann::json meta = nlohmann::json::parse(slurp(dir / "r.csv.json"));
    CHECK(meta.at("failures") == 2);
    CHECK(meta.at("seed") == c.seed);
    CHECK(to_json(config_from_json(meta.at("config"))) == to_json(c));
    CHECK_THROWS(emit_results(rows, dir / "missing" / "r.csv", c));
}
