#include "juice/check/oracles.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "juice/rng.hpp"

namespace juice::check {

namespace {

double real_dot(const CMatrix& a, const CMatrix& b)
{
    return (a.conjugate().cwiseProduct(b)).sum().real();
}

// Conjugate gradient for a convex quadratic in the real embedding of a complex
// matrix. `gradient` returns the real gradient (2 d f / d conj(Z)).
CMatrix quadratic_cg(const std::function<CMatrix(const CMatrix&)>& gradient, CMatrix start)
{
    const CMatrix zero = CMatrix::Zero(start.rows(), start.cols());
    const CMatrix g0 = gradient(zero);
    auto hessian = [&](const CMatrix& p) { return CMatrix(gradient(p) - g0); };

    CMatrix x = std::move(start);
    const double dims = static_cast<double>(2 * x.size());
    for (int restart = 0; restart < 20; ++restart) {
        CMatrix r = -gradient(x);
        CMatrix p = r;
        double rr = real_dot(r, r);
        const double scale = std::max(1.0, g0.norm());
        for (int it = 0; it < static_cast<int>(4 * dims) + 8 && std::sqrt(rr) > 1e-15 * scale; ++it) {
            const CMatrix hp = hessian(p);
            const double curvature = real_dot(p, hp);
            if (curvature <= 0.0)
                break;
            const double step = rr / curvature;
            x += step * p;
            r -= step * hp;
            const double rr_next = real_dot(r, r);
            p = r + (rr_next / rr) * p;
            rr = rr_next;
        }
        if (gradient(x).norm() <= 1e-14 * scale)
            break;
    }
    return x;
}

} // namespace

double z_objective(const CMatrix& z, const CMatrix& x, const CMatrix& dual_z,
                   const CMatrix& received, const CMatrix& pilots, double rho)
{
    return 0.5 * (pilots * z.transpose() - received).squaredNorm() +
           0.5 * rho * (x - z + dual_z / rho).squaredNorm();
}

CMatrix z_gradient(const CMatrix& z, const CMatrix& x, const CMatrix& dual_z,
                   const CMatrix& received, const CMatrix& pilots, double rho)
{
    const CMatrix residual = pilots * z.transpose() - received;
    return residual.transpose() * pilots.conjugate() - rho * (x + dual_z / rho - z);
}

CMatrix minimize_z(const CMatrix& x, const CMatrix& dual_z, const CMatrix& received,
                   const CMatrix& pilots, double rho)
{
    auto gradient = [&](const CMatrix& z) { return z_gradient(z, x, dual_z, received, pilots, rho); };
    return quadratic_cg(gradient, CMatrix::Zero(x.rows(), x.cols()));
}

double v_objective(const CMatrix& v, const CMatrix& x, const CMatrix& dual_v,
                   const std::vector<CMatrix>& sigma, double rho, double beta2,
                   const ClusterLayout& layout)
{
    double value = 0.5 * rho * (x - v + dual_v / rho).squaredNorm();
    for (Eigen::Index i = 0; i < v.cols(); ++i)
        value += beta2 * (v.col(i).adjoint() * sigma[static_cast<std::size_t>(layout.cluster_of(i))] * v.col(i))(0, 0).real();
    return value;
}

CMatrix v_gradient(const CMatrix& v, const CMatrix& x, const CMatrix& dual_v,
                   const std::vector<CMatrix>& sigma, double rho, double beta2,
                   const ClusterLayout& layout)
{
    CMatrix g = -rho * (x + dual_v / rho - v);
    for (Eigen::Index i = 0; i < v.cols(); ++i)
        g.col(i) += 2.0 * beta2 * (sigma[static_cast<std::size_t>(layout.cluster_of(i))] * v.col(i));
    return g;
}

CMatrix minimize_v(const CMatrix& x, const CMatrix& dual_v, const std::vector<CMatrix>& sigma,
                   double rho, double beta2, const ClusterLayout& layout)
{
    auto gradient = [&](const CMatrix& v) { return v_gradient(v, x, dual_v, sigma, rho, beta2, layout); };
    return quadratic_cg(gradient, CMatrix::Zero(x.rows(), x.cols()));
}

double x_objective(const CVector& x, const CVector& c, double alpha, double rho)
{
    return alpha * x.norm() + rho * (x - c).squaredNorm();
}

CVector minimize_x_column(const CVector& c, double alpha, double rho)
{
    const double norm = c.norm();
    if (norm == 0.0)
        return CVector::Zero(c.size());
    auto phi = [&](double t) { return alpha * std::abs(t) + rho * (t - norm) * (t - norm); };
    constexpr double inv_golden = 0.6180339887498949;
    double lo = -norm;
    double hi = 2.0 * norm;
    double a = hi - inv_golden * (hi - lo);
    double b = lo + inv_golden * (hi - lo);
    double fa = phi(a);
    double fb = phi(b);
    for (int it = 0; it < 400 && hi - lo > 1e-15 * norm; ++it) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_golden * (hi - lo);
            fa = phi(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_golden * (hi - lo);
            fb = phi(b);
        }
    }
    double t = 0.5 * (lo + hi);
    // The kink at 0 is the only non-smooth point; compare against it directly.
    if (phi(0.0) <= phi(t))
        t = 0.0;
    return (t / norm) * c;
}

double sigma_objective(const CMatrix& sigma, const CMatrix& scatter, const CMatrix& prior_guess,
                       double mu, double beta2, double beta3, double cluster_size)
{
    Eigen::LLT<CMatrix> llt(sigma);
    if (llt.info() != Eigen::Success)
        return std::numeric_limits<double>::infinity();
    const double log_det = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
    Eigen::LLT<CMatrix> b(prior_guess);
    return beta2 * (sigma * scatter).trace().real() - mu * log_det +
           beta3 * cluster_size * b.solve(sigma).trace().real();
}

CMatrix sigma_gradient(const CMatrix& sigma, const CMatrix& scatter, const CMatrix& prior_guess,
                       double mu, double beta2, double beta3, double cluster_size)
{
    const Eigen::Index m = sigma.rows();
    const CMatrix id = CMatrix::Identity(m, m);
    Eigen::LLT<CMatrix> s(sigma);
    Eigen::LLT<CMatrix> b(prior_guess);
    return beta2 * scatter - mu * s.solve(id) + beta3 * cluster_size * b.solve(id);
}

CMatrix minimize_sigma(const CMatrix& scatter, const CMatrix& prior_guess, double mu,
                       double beta2, double beta3, double cluster_size)
{
    const Eigen::Index m = scatter.rows();
    auto f = [&](const CMatrix& s) {
        return sigma_objective(s, scatter, prior_guess, mu, beta2, beta3, cluster_size);
    };
    // Linear part tr(A Sigma); A only enters through products A Sigma, never inverted.
    Eigen::LLT<CMatrix> b(prior_guess);
    const CMatrix a = beta2 * scatter + beta3 * cluster_size * b.solve(CMatrix::Identity(m, m));

    // Start inside the basin: mu / tr(A) <= mu / lambda_max(A).
    CMatrix sigma = CMatrix::Identity(m, m) * (mu / a.trace().real());
    const double step = 0.5 / mu;
    for (int it = 0; it < 20000; ++it) {
        // Natural gradient Sigma (A - mu Sigma^-1) Sigma = Sigma A Sigma - mu Sigma.
        CMatrix direction = sigma * a * sigma - mu * sigma;
        direction = 0.5 * (direction + direction.adjoint());
        if (direction.norm() <= 1e-15 * mu * sigma.norm())
            break;
        double t = step;
        CMatrix trial = sigma - t * direction;
        while (!std::isfinite(f(trial)) && t > 1e-12 * step) {
            t *= 0.5;
            trial = sigma - t * direction;
        }
        sigma = 0.5 * (trial + trial.adjoint());
    }
    return sigma;
}

CMatrix random_hpd(Eigen::Index m, double floor, std::uint64_t seed)
{
    Rng rng(seed);
    const CMatrix a = standard_complex_normal(m, m, rng);
    CMatrix h = a * a.adjoint();
    h.diagonal().array() += floor;
    return 0.5 * (h + h.adjoint());
}

} // namespace juice::check
