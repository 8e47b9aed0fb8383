#include <doctest.h>

#include <cmath>

#include "juice/baselines.hpp"
#include "juice/check/oracles.hpp"
#include "juice/harness.hpp"
#include "juice/metrics.hpp"
#include "juice/rng.hpp"
#include "juice/solver.hpp"

using namespace juice;

namespace {

CMatrix direct_gram_inverse(const CMatrix& phi, double rho)
{
    CMatrix g = phi.transpose() * phi.conjugate();
    g.diagonal().array() += rho;
    return g.inverse();
}

} // namespace

TEST_CASE("Gram solver")
{
    Rng rng(1);
    for (Eigen::Index tau : {3, 9, 12}) {
        const CMatrix phi = standard_complex_normal(tau, 9, rng);
        const GramSolver g(phi, 0.7);
        const CMatrix ref = direct_gram_inverse(phi, 0.7);
        CHECK((g.inverse() - ref).norm() < 1e-10 * ref.norm());
        const CMatrix r = standard_complex_normal(4, 9, rng);
        CHECK((g.apply(r) - r * ref).norm() < 1e-10 * r.norm() * ref.norm());
    }
    CHECK_THROWS_AS(GramSolver(CMatrix::Identity(2, 2), 0.0), ConfigError);
}

TEST_CASE("Z update")
{
    Rng rng(2);
    SUBCASE("orthonormal pilots, rho = 1")
    {
        const CMatrix phi = orthonormal_pilots(6, 6);
        const CMatrix x = standard_complex_normal(3, 6, rng);
        const CMatrix lam = standard_complex_normal(3, 6, rng);
        const CMatrix y = standard_complex_normal(6, 3, rng);
        const CMatrix z = update_z(x, lam, y, phi, GramSolver(phi, 1.0));
        CHECK((z - 0.5 * (x + lam + y.transpose() * phi.conjugate())).norm() < 1e-12);
    }
    SUBCASE("large rho pins Z to X")
    {
        const CMatrix phi = standard_complex_normal(3, 5, rng);
        const CMatrix x = standard_complex_normal(2, 5, rng);
        const CMatrix z = update_z(x, CMatrix::Zero(2, 5), CMatrix::Zero(3, 2), phi, GramSolver(phi, 1e9));
        CHECK((z - x).norm() < 1e-7 * x.norm());
    }
    SUBCASE("numeric minimizer, M=2 N=3 tau=2")
    {
        const CMatrix phi = standard_complex_normal(2, 3, rng);
        const CMatrix x = standard_complex_normal(2, 3, rng);
        const CMatrix lam = standard_complex_normal(2, 3, rng);
        const CMatrix y = standard_complex_normal(2, 2, rng);
        const CMatrix z = update_z(x, lam, y, phi, GramSolver(phi, 1.3));
        const CMatrix ref = check::minimize_z(x, lam, y, phi, 1.3);
        CHECK((z - ref).norm() <= 1e-6 * ref.norm());
        CHECK(check::z_gradient(z, x, lam, y, phi, 1.3).norm() < 1e-8);
    }
}

TEST_CASE("V update")
{
    Rng rng(3);
    const ClusterLayout layout(4, 2);
    const CMatrix x = standard_complex_normal(3, 4, rng);
    const CMatrix lam = standard_complex_normal(3, 4, rng);
    const double rho = 0.8;

    const std::vector<CMatrix> any{check::random_hpd(3, 0.1, 1), check::random_hpd(3, 0.1, 2)};
    CHECK((update_v(x, lam, any, rho, 0.0, layout) - (x + lam / rho)).norm() < 1e-13);

    // Identity precision: the exact minimizer of beta2 v^H v + rho/2 ||x - v + lam/rho||^2
    // is rho / (rho + 2 beta2) (x + lam / rho).
    const double beta2 = 0.35;
    const std::vector<CMatrix> id(2, CMatrix::Identity(3, 3));
    CHECK((update_v(x, lam, id, rho, beta2, layout) - rho / (rho + 2.0 * beta2) * (x + lam / rho)).norm() < 1e-13);

    const CMatrix v = update_v(x, lam, any, rho, beta2, layout);
    CHECK(check::v_gradient(v, x, lam, any, rho, beta2, layout).norm() < 1e-8);
}

TEST_CASE("X update")
{
    const RVector alpha = RVector::Constant(1, 4.0);
    CMatrix c(2, 1);
    c << 3.0, 4.0;
    const CMatrix zero = CMatrix::Zero(2, 1);

    // C = (Z + V) / 2 with Z = V = c, threshold alpha / (2 rho) = 2.
    const CMatrix x = update_x(c, c, zero, zero, alpha, 1.0);
    CHECK(std::abs(x(0, 0) - 1.8) < 1e-12);
    CHECK(std::abs(x(1, 0) - 2.4) < 1e-12);
    const CVector ref = check::minimize_x_column(c.col(0), 4.0, 1.0);
    CHECK((x.col(0) - ref).norm() < 1e-6 * ref.norm());

    CHECK(update_x(zero, zero, zero, zero, alpha, 1.0).isZero());
    const CMatrix small = c * (1.9 / 5.0);
    CHECK(update_x(small, small, zero, zero, alpha, 1.0).isZero());
    // Negative weights are treated as zero: plain averaging.
    CHECK((update_x(c, c, zero, zero, RVector::Constant(1, -3.0), 1.0) - c).norm() < 1e-14);
}

TEST_CASE("alpha and mu")
{
    const ClusterLayout layout(4, 2);
    const RVector w = (RVector(4) << 0.5, 2.0, 1.0, 3.0).finished();
    const RVector p = RVector::Ones(4);
    const std::vector<CMatrix> id(2, CMatrix::Identity(2, 2));
    const std::vector<CMatrix> big{100.0 * CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)};

    CHECK((compute_alpha(w, big, {1.5, 0.0, 0.1}, p, layout, 2) - 1.5 * w).norm() < 1e-14);
    CHECK((compute_alpha(w, id, {1.5, 0.4, 0.1}, p, layout, 2) - 1.5 * w).norm() < 1e-14);
    // log det = 2 log 100 ~ 9.2, 0.4 * 9.2 > 1.5
    const RVector clamped = compute_alpha(w, big, {1.5, 0.4, 0.1}, p, layout, 2);
    CHECK(clamped(0) == 0.0);
    CHECK(clamped(1) == 0.0);
    CHECK(clamped(2) == doctest::Approx(1.5));

    const PriorWeights betas{1.0, 0.3, 0.2};
    const RVector mu0 = compute_mu(w, CMatrix::Zero(2, 4), p, betas, 1.5, layout);
    CHECK(mu0.isConstant(0.2 * 2 * 1.5, 1e-15));
    Rng rng(5);
    const CMatrix x = standard_complex_normal(2, 4, rng);
    CHECK(compute_mu(w, x, p, {1.0, 0.0, 0.2}, 1.5, layout).isConstant(0.6, 1e-15));

    const RVector pw = (RVector(4) << 1.1, 0.9, 1.0, 1.2).finished();
    const RVector mu = compute_mu(w, x, pw, betas, 1.5, layout);
    for (Eigen::Index l = 0; l < 2; ++l) {
        double acc = 0.0;
        for (Eigen::Index i = 2 * l; i < 2 * l + 2; ++i)
            acc += std::pow(pw(i), 2.0) * w(i) * x.col(i).norm();
        CHECK(std::abs(mu(l) - (0.3 * acc + 0.2 * 2 * 1.5)) < 1e-12);
    }
    const RVector mu_flat = compute_mu(w, x, pw, betas, 1.5, layout, false);
    CHECK(std::abs(mu_flat(0) - (0.3 * (w(0) * x.col(0).norm() + w(1) * x.col(1).norm()) + 0.6)) < 1e-12);
}

TEST_CASE("Sigma update")
{
    const ClusterLayout layout(4, 2);
    Rng rng(6);
    const CMatrix v = standard_complex_normal(3, 4, rng);
    const std::vector<CMatrix> b{check::random_hpd(3, 0.2, 7), check::random_hpd(3, 0.2, 8)};
    const RVector mu = (RVector(2) << 0.7, 1.9).finished();

    const std::vector<CMatrix> s0 = update_sigma(v, b, mu, {1.0, 0.0, 0.25}, layout);
    for (std::size_t l = 0; l < 2; ++l)
        CHECK((s0[l] - mu(static_cast<Eigen::Index>(l)) / (0.25 * 2) * b[l]).norm() < 1e-12 * b[l].norm());

    const std::vector<CMatrix> id(2, CMatrix::Identity(3, 3));
    const std::vector<CMatrix> s1 = update_sigma(v, id, RVector::Constant(2, 0.25 * 2), {1.0, 0.0, 0.25}, layout);
    CHECK((s1[0] - CMatrix::Identity(3, 3)).norm() < 1e-13);

    const PriorWeights betas{1.0, 0.4, 0.25};
    const std::vector<CMatrix> s = update_sigma(v, b, mu, betas, layout);
    for (std::size_t l = 0; l < 2; ++l) {
        const auto block = v.middleCols(2 * static_cast<Eigen::Index>(l), 2);
        const CMatrix g = check::sigma_gradient(s[l], block * block.adjoint(), b[l], mu(static_cast<Eigen::Index>(l)),
                                                0.4, 0.25, 2.0);
        CHECK(g.norm() < 1e-8);
        CHECK((s[l] - s[l].adjoint()).norm() <= 1e-10 * s[l].norm());
    }
    CHECK_THROWS_AS(update_sigma(v, b, RVector::Zero(2), betas, layout), SolverFault);
}

TEST_CASE("duals and cluster detection")
{
    Rng rng(9);
    const CMatrix x = standard_complex_normal(2, 4, rng);
    const CMatrix z = standard_complex_normal(2, 4, rng);
    const CMatrix v = standard_complex_normal(2, 4, rng);
    const CMatrix lz0 = standard_complex_normal(2, 4, rng);
    const CMatrix lv0 = standard_complex_normal(2, 4, rng);
    CMatrix lz = lz0;
    CMatrix lv = lv0;
    update_duals(x, x, v, lz, lv, 0.6);
    CHECK(lz == lz0);
    CHECK((lv - (lv0 + 0.6 * (x - v))).norm() < 1e-14);
    lz = lz0;
    update_duals(x, z, v, lz, lv, 0.6);
    CHECK((lz - (lz0 + 0.6 * (x - z))).norm() < 1e-14);

    const ClusterLayout layout(12, 4);
    CHECK(detect_active_clusters(CMatrix::Zero(2, 12), layout, 0.1).empty());
    CMatrix one = CMatrix::Zero(2, 12);
    one(0, 7) = 0.2;
    const std::vector<Eigen::Index> hit = detect_active_clusters(one, layout, 0.1);
    REQUIRE(hit.size() == 1);
    CHECK(hit[0] == 2);
    CHECK(cluster_union(hit, layout) == UserSet{6, 7, 8});

    SolverParams bad;
    bad.rho = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("solve: zero input")
{
    SystemConfig cfg;
    cfg.pilot_length = 20;
    const ProblemInstance inst = generate_instance(cfg, 4);
    const CMatrix y = CMatrix::Zero(20, cfg.antennas);
    const SolverParams p = preset("desk").proposed.resolve(0.1, cfg.antennas);
    const JuiceSolution sol = solve(y, inst.pilots, inst.layout, inst.prior_guess, inst.stats.powers, p);
    CHECK(sol.channels.isZero());
    CHECK(sol.support.empty());
    CHECK(ir_l21_admm(y, inst.pilots, p).channels.isZero());
}

TEST_CASE("solve: noiseless orthonormal recovery")
{
    ExperimentConfig c = preset("desk");
    c.noiseless = true;
    c.system.orthonormal_pilots = true;
    const Eigen::Index n = c.system.users;
    for (int trial = 0; trial < 3; ++trial) {
        for (const TrialResult& r : run_trial(c, n, trial_seed(9, n, trial), trial)) {
            CAPTURE(r.algorithm);
            REQUIRE_FALSE(r.failed);
            CHECK(r.nmse_num / r.nmse_den < 1e-6);
            CHECK(r.srr == 1.0);
        }
    }
}

TEST_CASE("solve: residuals and iterates")
{
    ExperimentConfig c = preset("desk");
    SystemConfig s = c.system;
    s.pilot_length = 30;
    s.noise_var = c.noise_var();
    const ProblemInstance inst = generate_instance(s, trial_seed(3, 30, 1));
    SolverParams p = c.proposed.resolve(s.noise_var, s.antennas);
    p.record_diagnostics = true;
    const JuiceSolution sol = solve(inst.received, inst.pilots, inst.layout, inst.prior_guess, inst.stats.powers, p);
    REQUIRE_FALSE(sol.diagnostics.empty());
    CHECK(sol.total_iterations == static_cast<int>(sol.diagnostics.size()));
    for (const CMatrix& sigma : sol.precisions) {
        CHECK((sigma - sigma.adjoint()).norm() <= 1e-10 * sigma.norm());
        CHECK(Eigen::LLT<CMatrix>(sigma).info() == Eigen::Success);
    }
    // Detected clusters cover the true ones at 10 dB.
    std::vector<Eigen::Index> truth;
    for (UserIndex i : inst.activity.active)
        truth.push_back(inst.layout.cluster_of(i));
    for (Eigen::Index l : truth)
        CHECK(std::find(sol.active_clusters.begin(), sol.active_clusters.end(), l) != sol.active_clusters.end());

    // IR runs to convergence: ADMM residuals end below eps_conv * ||X||.
    SolverParams q = c.ir_l21.resolve(s.noise_var, s.antennas);
    q.record_diagnostics = true;
    q.eps_conv = 1e-6;
    q.k_c_max = 2000;
    const JuiceSolution ir = ir_l21_admm(inst.received, inst.pilots, q);
    CHECK(ir.converged);
    const IterationRecord& last = ir.diagnostics.back();
    CHECK(last.residual_z <= 1e-4 * ir.channels.norm());
    CHECK(last.residual_v <= 1e-4 * ir.channels.norm());
}

TEST_CASE("solve: support invariant under joint scaling of Y and beta1")
{
    ExperimentConfig c = preset("desk");
    SystemConfig s = c.system;
    s.pilot_length = 25;
    s.noise_var = c.noise_var();
    const ProblemInstance inst = generate_instance(s, trial_seed(5, 25, 0));

    SolverParams p = c.ir_l21.resolve(s.noise_var, s.antennas);
    p.betas.beta2 = 0.0;
    p.betas.beta3 = 0.0;
    // Unit-weight warm-up breaks the homogeneity; start from the ridge
    // estimate instead.
    p.init = Initialization::ridge;
    p.warmup_iterations = 0;
    p.betas.beta1 = 0.05;
    const JuiceSolution base = solve(inst.received, inst.pilots, inst.layout, inst.prior_guess, inst.stats.powers, p);
    REQUIRE_FALSE(base.support.empty());
    for (double scale : {0.1, 3.0, 20.0}) {
        SolverParams q = p;
        q.betas.beta1 *= scale * scale;
        q.eps0 *= scale;
        q.eps_conv *= scale;
        const JuiceSolution scaled =
            solve(scale * inst.received, inst.pilots, inst.layout, inst.prior_guess, inst.stats.powers, q);
        CHECK(scaled.support == base.support);
        CHECK((scaled.channels - scale * base.channels).norm() <= 1e-8 * scale * base.channels.norm());
    }
}

TEST_CASE("solve: input validation")
{
    const ClusterLayout layout(6, 2);
    const CMatrix phi = gen_pilots(4, 6, 1);
    const SolverParams p;
    CHECK_THROWS_AS(solve(CMatrix::Zero(3, 2), phi, layout, {}, RVector::Ones(6), p), ConfigError);
    CHECK_THROWS_AS(solve(CMatrix::Zero(4, 2), phi, ClusterLayout(4, 2), {}, RVector::Ones(6), p), ConfigError);
    CHECK_THROWS_AS(solve(CMatrix::Zero(4, 2), phi, layout, {CMatrix::Identity(2, 2)}, RVector::Ones(6), p),
                    ConfigError);
}
