#include "juice/check/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "juice/check/oracles.hpp"
#include "juice/priors.hpp"
#include "juice/rng.hpp"
#include "juice/solver.hpp"

namespace juice::check {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct SmallInstance {
    ClusterLayout layout;
    AdmmProblem problem;
    AdmmState state;
    PriorWeights betas;
    double rho = 1.0;
    RVector mm_weights;
};

// Random instance with a random cluster layout; columns of Phi are unit norm.
SmallInstance random_instance(Rng& rng, Eigen::Index max_m, Eigen::Index max_n, Eigen::Index max_tau)
{
    std::uniform_int_distribution<Eigen::Index> pick_m(1, max_m);
    std::uniform_int_distribution<Eigen::Index> pick_n(1, max_n);
    std::uniform_int_distribution<Eigen::Index> pick_tau(1, max_tau);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SmallInstance s;
    const Eigen::Index m = pick_m(rng);
    const Eigen::Index n = pick_n(rng);
    const Eigen::Index tau = pick_tau(rng);
    std::vector<Eigen::Index> divisors;
    for (Eigen::Index c = 1; c <= n; ++c)
        if (n % c == 0)
            divisors.push_back(c);
    std::uniform_int_distribution<std::size_t> pick_c(0, divisors.size() - 1);
    s.layout = ClusterLayout(n, divisors[pick_c(rng)]);

    s.problem.layout = s.layout;
    s.problem.pilots = standard_complex_normal(tau, n, rng);
    s.problem.pilots.colwise().normalize();
    s.problem.received = standard_complex_normal(tau, m, rng) * (0.5 + 2.0 * unit(rng));
    s.problem.powers = (0.5 + 1.0 * RVector::NullaryExpr(n, [&] { return unit(rng); }).array()).matrix();
    for (Eigen::Index l = 0; l < s.layout.n_clusters(); ++l) {
        s.problem.prior_guess.push_back(random_hpd(m, 0.2, rng()));
        s.state.sigma.push_back(random_hpd(m, 0.2, rng()));
    }

    const double scale = 0.2 + 3.0 * unit(rng);
    s.state.x = scale * standard_complex_normal(m, n, rng);
    for (Eigen::Index i = 0; i < n; ++i)
        if (unit(rng) < 0.3)
            s.state.x.col(i).setZero();
    s.state.z = standard_complex_normal(m, n, rng);
    s.state.v = standard_complex_normal(m, n, rng);
    s.state.dual_z = standard_complex_normal(m, n, rng) * unit(rng);
    s.state.dual_v = standard_complex_normal(m, n, rng) * unit(rng);

    s.rho = 0.3 + 2.0 * unit(rng);
    s.betas = {0.05 + 2.0 * unit(rng), 0.01 + unit(rng), 0.01 + unit(rng)};
    s.mm_weights = mm_weights_outer(s.state.x, s.layout, 1e-3).weights;
    return s;
}

double rel_error(const CMatrix& value, const CMatrix& reference, double floor)
{
    return (value - reference).norm() / std::max(reference.norm(), floor);
}

} // namespace

std::vector<CheckReport> check_update_oracles(int instances, std::uint64_t seed, double tolerance,
                                              double sigma_gradient_tolerance)
{
    const auto start = Clock::now();
    CheckReport z{"update Z vs numeric minimizer", true, 0, 0.0, tolerance};
    CheckReport v{"update V vs numeric minimizer", true, 0, 0.0, tolerance};
    CheckReport x{"update X vs numeric minimizer", true, 0, 0.0, tolerance};
    CheckReport sg{"update Sigma vs numeric minimizer", true, 0, 0.0, tolerance};
    CheckReport grad{"update Sigma stationarity residual", true, 0, 0.0, sigma_gradient_tolerance};
    CheckReport zv_grad{"update Z/V stationarity residual", true, 0, 0.0, sigma_gradient_tolerance};
    CheckReport herm{"Sigma Hermitian and positive definite", true, 0, 0.0, 1e-10};

    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < instances; ++k) {
        SmallInstance s = random_instance(rng, 4, 6, 4);
        const AdmmProblem& p = s.problem;
        const AdmmState& st = s.state;

        const GramSolver gram(p.pilots, s.rho);
        const CMatrix z_closed = update_z(st.x, st.dual_z, p.received, p.pilots, gram);
        const CMatrix z_ref = minimize_z(st.x, st.dual_z, p.received, p.pilots, s.rho);
        z.worst = std::max(z.worst, rel_error(z_closed, z_ref, 1e-12));
        const double z_scale = std::max(1.0, (p.pilots.adjoint() * p.received).norm() + (s.rho * st.x + st.dual_z).norm());
        zv_grad.worst = std::max(zv_grad.worst,
                                 z_gradient(z_closed, st.x, st.dual_z, p.received, p.pilots, s.rho).norm() / z_scale);

        const CMatrix v_closed = update_v(st.x, st.dual_v, st.sigma, s.rho, s.betas.beta2, s.layout);
        const CMatrix v_ref = minimize_v(st.x, st.dual_v, st.sigma, s.rho, s.betas.beta2, s.layout);
        v.worst = std::max(v.worst, rel_error(v_closed, v_ref, 1e-12));
        const double v_scale = std::max(1.0, (s.rho * st.x + st.dual_v).norm());
        zv_grad.worst = std::max(zv_grad.worst, v_gradient(v_closed, st.x, st.dual_v, st.sigma, s.rho,
                                                           s.betas.beta2, s.layout).norm() / v_scale);

        // Thresholds spread so that both the zeroing and shrinking branches occur.
        const CMatrix c = 0.5 * (st.z + st.v - (st.dual_z + st.dual_v) / s.rho);
        RVector alpha(c.cols());
        for (Eigen::Index i = 0; i < c.cols(); ++i)
            alpha(i) = 4.0 * s.rho * c.col(i).norm() * unit(rng);
        const CMatrix x_closed = update_x(st.z, st.v, st.dual_z, st.dual_v, alpha, s.rho);
        CMatrix x_ref(c.rows(), c.cols());
        for (Eigen::Index i = 0; i < c.cols(); ++i)
            x_ref.col(i) = minimize_x_column(c.col(i), alpha(i), s.rho);
        x.worst = std::max(x.worst, rel_error(x_closed, x_ref, c.norm()));

        const RVector mu = compute_mu(s.mm_weights, st.x, p.powers, s.betas, 1.0, s.layout);
        const std::vector<CMatrix> sigma_closed = update_sigma(v_closed, p.prior_guess, mu, s.betas, s.layout);
        const double per = static_cast<double>(s.layout.users_per_cluster());
        for (Eigen::Index l = 0; l < s.layout.n_clusters(); ++l) {
            const auto lu = static_cast<std::size_t>(l);
            const auto block = v_closed.middleCols(s.layout.first_user(l), s.layout.users_per_cluster());
            const CMatrix scatter = block * block.adjoint();
            const CMatrix ref = minimize_sigma(scatter, p.prior_guess[lu], mu(l), s.betas.beta2, s.betas.beta3, per);
            sg.worst = std::max(sg.worst, rel_error(sigma_closed[lu], ref, 1e-12));
            const CMatrix g = sigma_gradient(sigma_closed[lu], scatter, p.prior_guess[lu], mu(l),
                                             s.betas.beta2, s.betas.beta3, per);
            grad.worst = std::max(grad.worst, g.norm());
            const CMatrix& sc = sigma_closed[lu];
            double asym = (sc - sc.adjoint()).norm() / sc.norm();
            if (Eigen::LLT<CMatrix>(hermitian_part(sc)).info() != Eigen::Success)
                asym = std::numeric_limits<double>::infinity();
            herm.worst = std::max(herm.worst, asym);
        }
    }

    std::vector<CheckReport> out{z, v, x, sg, grad, zv_grad, herm};
    const double seconds = elapsed(start);
    for (CheckReport& r : out) {
        r.cases = instances;
        r.passed = r.worst <= r.tolerance;
        r.seconds = seconds;
    }
    return out;
}

CheckReport check_mm_surrogate(int pairs, std::uint64_t seed, double tolerance)
{
    const auto start = Clock::now();
    CheckReport r{"MM surrogate majorizes log-sum priors", true, pairs, 0.0, tolerance};
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<Eigen::Index> pick_m(1, 6);
    std::uniform_int_distribution<Eigen::Index> pick_c(1, 5);
    std::uniform_int_distribution<Eigen::Index> pick_l(1, 5);
    double worst_gap = 0.0;      // largest violation of surrogate >= prior
    double worst_contact = 0.0;  // largest mismatch at the expansion point
    for (int k = 0; k < pairs; ++k) {
        const Eigen::Index m = pick_m(rng);
        const Eigen::Index n_clusters = pick_c(rng);
        const ClusterLayout clusters(n_clusters * pick_l(rng), n_clusters);
        const double eps0 = std::pow(10.0, -4.0 + 4.0 * unit(rng));
        auto draw = [&] {
            CMatrix x = std::pow(10.0, -2.0 + 3.0 * unit(rng)) * standard_complex_normal(m, clusters.n_users(), rng);
            for (Eigen::Index i = 0; i < x.cols(); ++i)
                if (unit(rng) < 0.3)
                    x.col(i).setZero();
            return x;
        };
        const CMatrix expansion = draw();
        const CMatrix probe = draw();

        const double sep_probe = separable_surrogate(probe, expansion, eps0) - eval_separable_prior(probe, eps0);
        const double clu_probe = cluster_surrogate(probe, expansion, clusters, eps0) -
                                 eval_cluster_prior(probe, clusters, eps0);
        const double sep_contact = separable_surrogate(expansion, expansion, eps0) -
                                   eval_separable_prior(expansion, eps0);
        const double clu_contact = cluster_surrogate(expansion, expansion, clusters, eps0) -
                                   eval_cluster_prior(expansion, clusters, eps0);
        worst_gap = std::max({worst_gap, -sep_probe, -clu_probe});
        worst_contact = std::max({worst_contact, std::abs(sep_contact), std::abs(clu_contact)});
    }
    r.worst = std::max(worst_gap, worst_contact);
    r.passed = worst_gap <= tolerance && worst_contact <= tolerance;
    char buf[160];
    std::snprintf(buf, sizeof buf, "max violation %.3e, max contact error %.3e", worst_gap, worst_contact);
    r.detail = buf;
    r.seconds = elapsed(start);
    return r;
}

CheckReport check_lagrangian_monotonicity(int runs, std::uint64_t seed, double tolerance, int sweeps_per_run)
{
    const auto start = Clock::now();
    CheckReport r{"augmented Lagrangian non-increasing per primal sweep", true, runs, 0.0, tolerance};
    Rng rng(seed);
    const char* block_names[] = {"Z", "V", "X", "Sigma"};
    for (int k = 0; k < runs; ++k) {
        SmallInstance s = random_instance(rng, 4, 8, 6);
        SolverParams params;
        params.betas = s.betas;
        params.rho = s.rho;
        const AdmmProblem& p = s.problem;
        const GramSolver gram(p.pilots, s.rho);
        AdmmState& st = s.state;
        for (int sweep = 0; sweep < sweeps_per_run; ++sweep) {
            const RVector weights = mm_weights_outer(st.x, s.layout, params.eps0).weights;
            const IterationWeights w = iteration_weights(p, st, weights, params, true);
            auto lagrangian = [&] { return augmented_lagrangian(p, st, w.alpha, w.mu, s.betas, s.rho); };
            double before = lagrangian();
            for (int block = 0; block < 4; ++block) {
                switch (block) {
                case 0: st.z = update_z(st.x, st.dual_z, p.received, p.pilots, gram); break;
                case 1: st.v = update_v(st.x, st.dual_v, st.sigma, s.rho, s.betas.beta2, s.layout); break;
                case 2: st.x = update_x(st.z, st.v, st.dual_z, st.dual_v, w.alpha, s.rho); break;
                default: st.sigma = update_sigma(st.v, p.prior_guess, w.mu, s.betas, s.layout); break;
                }
                const double after = lagrangian();
                const double rise = (after - before) / std::max(1.0, std::abs(before));
                if (rise > r.worst) {
                    r.worst = rise;
                    char buf[160];
                    std::snprintf(buf, sizeof buf, "worst rise after %s update (run %d, sweep %d)",
                                  block_names[block], k, sweep);
                    r.detail = buf;
                }
                before = after;
            }
            update_duals(st.x, st.z, st.v, st.dual_z, st.dual_v, s.rho);
        }
    }
    r.passed = r.worst <= tolerance;
    r.seconds = elapsed(start);
    return r;
}

std::vector<CheckReport> run_validation_suite(std::uint64_t seed, int scale)
{
    scale = std::max(1, scale);
    std::vector<CheckReport> out = check_update_oracles(100 * scale, derive_seed(seed, 1));
    out.push_back(check_mm_surrogate(100 * scale, derive_seed(seed, 2)));
    out.push_back(check_lagrangian_monotonicity(10 * scale, derive_seed(seed, 3)));
    return out;
}

std::string format_report(const CheckReport& report)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s  %-52s cases=%-5d worst=%.3e tol=%.1e (%.2fs)",
                  report.passed ? "PASS" : "FAIL", report.name.c_str(), report.cases, report.worst,
                  report.tolerance, report.seconds);
    std::string line = buf;
    if (!report.detail.empty())
        line += "  " + report.detail;
    return line;
}

} // namespace juice::check
