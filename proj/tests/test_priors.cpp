#include <doctest.h>

#include <cmath>

#include "juice/check/oracles.hpp"
#include "juice/priors.hpp"
#include "juice/rng.hpp"

using namespace juice;

TEST_CASE("separable log-sum prior")
{
    CHECK(eval_separable_prior(CMatrix::Zero(3, 2), 1.0) == doctest::Approx(0.0));

    CMatrix x = CMatrix::Zero(2, 2);
    x(0, 0) = std::exp(1.0) - 1.0;
    CHECK(eval_separable_prior(x, 1.0) == doctest::Approx(1.0));

    Rng rng(3);
    const CMatrix r = standard_complex_normal(4, 7, rng);
    double naive = 0.0;
    for (Eigen::Index i = 0; i < r.cols(); ++i) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < r.rows(); ++k)
            s += std::norm(r(k, i));
        naive += std::log(std::sqrt(s) + 1e-3);
    }
    CHECK(std::abs(eval_separable_prior(r, 1e-3) - naive) < 1e-12);
    CHECK_THROWS_AS(eval_separable_prior(r, 0.0), ConfigError);
}

TEST_CASE("cluster log-sum prior")
{
    const ClusterLayout three(6, 3);
    CHECK(eval_cluster_prior(CMatrix::Zero(2, 6), three, 1.0) == doctest::Approx(0.0));

    CMatrix single = CMatrix::Zero(2, 6);
    single(1, 4) = cplx(0.0, 2.5);
    const double eps = 0.3;
    CHECK(eval_cluster_prior(single, three, eps) == doctest::Approx(std::log(2.5 + eps) + 2.0 * std::log(eps)));

    // Mass concentrated in one cluster with several active members costs less
    // under the cluster prior. eps0 = 1 so that empty columns and clusters
    // contribute log 1 = 0 to either sum.
    Rng rng(8);
    const ClusterLayout layout(12, 3);
    for (int k = 0; k < 20; ++k) {
        CMatrix x = CMatrix::Zero(3, 12);
        x.middleCols(4, 3) = standard_complex_normal(3, 3, rng);
        CHECK(eval_cluster_prior(x, layout, 1.0) < eval_separable_prior(x, 1.0));
    }
}

TEST_CASE("MM weights")
{
    const ClusterLayout layout(6, 2);
    const MMWeights zero = mm_weights_outer(CMatrix::Zero(2, 6), layout, 1e-3);
    CHECK(zero.weights.isConstant(1e3));
    CHECK(mm_weights_inner(CMatrix::Zero(2, 6), 1e-3).weights.isConstant(1e3));

    CMatrix x = CMatrix::Zero(1, 6);
    x(0, 0) = 2.0;
    x(0, 1) = cplx(0.0, 3.0);
    x(0, 2) = -4.0;
    const MMWeights w = mm_weights_outer(x, layout, 1.0);
    CHECK(w.weights.head(3).isConstant(0.1, 1e-15));
    CHECK(w.weights.tail(3).isConstant(1.0, 1e-15));

    Rng rng(4);
    const CMatrix r = standard_complex_normal(3, 6, rng);
    for (double v : mm_weights_inner(r, 1e-3).weights) {
        CHECK(v > 0.0);
        CHECK(v <= 1e3);
    }
    // Tangency at the expansion point.
    CHECK(separable_surrogate(r, r, 1e-3) == doctest::Approx(eval_separable_prior(r, 1e-3)).epsilon(1e-14));
    CHECK(cluster_surrogate(r, r, layout, 1e-3) ==
          doctest::Approx(eval_cluster_prior(r, layout, 1e-3)).epsilon(1e-14));
}

TEST_CASE("Wishart negative log-density")
{
    CHECK(eval_wishart_neglog(CMatrix::Identity(4, 4), CMatrix::Identity(4, 4), 3.7) == doctest::Approx(4.0));
    const double c = 1.7;
    CHECK(eval_wishart_neglog(c * CMatrix::Identity(2, 2), CMatrix::Identity(2, 2), 1.0) ==
          doctest::Approx(-2.0 * std::log(c) + 2.0 * c));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const CMatrix s = check::random_hpd(4, 0.1, seed);
        const CMatrix b = check::random_hpd(4, 0.1, seed + 100);
        const double d = 2.5;
        // eigenvalue oracle: log det from eigenvalues, trace via B^-1/2 S B^-1/2
        Eigen::SelfAdjointEigenSolver<CMatrix> es(s);
        Eigen::SelfAdjointEigenSolver<CMatrix> eb(b);
        const CMatrix b_inv_sqrt = eb.eigenvectors() * eb.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                   eb.eigenvectors().adjoint();
        Eigen::SelfAdjointEigenSolver<CMatrix> ew(b_inv_sqrt * s * b_inv_sqrt);
        const double oracle = -d * es.eigenvalues().array().log().sum() + ew.eigenvalues().sum();
        CHECK(std::abs(eval_wishart_neglog(s, b, d) - oracle) < 1e-10 * std::max(1.0, std::abs(oracle)));
    }
    CHECK_THROWS_AS(eval_wishart_neglog(CMatrix::Identity(2, 2), CMatrix::Identity(2, 2), 0.0), ConfigError);
    CMatrix indefinite = CMatrix::Identity(2, 2);
    indefinite(1, 1) = -1.0;
    CHECK_THROWS_AS(log_det_hpd(indefinite), DomainError);
}

TEST_CASE("MAP objective")
{
    Rng rng(21);
    const ClusterLayout layout(6, 2);
    const Eigen::Index m = 3;
    const CMatrix phi = standard_complex_normal(4, 6, rng);
    const CMatrix x = standard_complex_normal(m, 6, rng);
    const CMatrix y = standard_complex_normal(4, m, rng);
    const std::vector<CMatrix> sigma{check::random_hpd(m, 0.2, 1), check::random_hpd(m, 0.2, 2)};
    const std::vector<CMatrix> b{check::random_hpd(m, 0.2, 3), check::random_hpd(m, 0.2, 4)};
    const RVector w = mm_weights_outer(x, layout, 1e-3).weights;
    RVector mu(2);
    mu << 0.4, 0.9;

    SUBCASE("no prior weights leaves the fidelity term")
    {
        const RVector none;
        const MapObjectiveInput in{x, sigma, y, phi, b, w, none, layout};
        CHECK(eval_map_objective(in, {}).total() ==
              doctest::Approx(0.5 * (y - phi * x.transpose()).squaredNorm()));
    }
    SUBCASE("zero signal leaves the covariance terms")
    {
        const CMatrix x0 = CMatrix::Zero(m, 6);
        const CMatrix y0 = CMatrix::Zero(4, m);
        const PriorWeights betas{0.7, 0.2, 0.3};
        const MapObjectiveInput in{x0, sigma, y0, phi, b, w, mu, layout};
        double expected = 0.0;
        for (std::size_t l = 0; l < 2; ++l)
            expected += -mu(static_cast<Eigen::Index>(l)) * std::log(sigma[l].determinant().real()) +
                        0.3 * 3.0 * (b[l].inverse() * sigma[l]).trace().real();
        CHECK(eval_map_objective(in, betas).total() == doctest::Approx(expected).epsilon(1e-10));
    }
    SUBCASE("term-by-term re-evaluation")
    {
        const PriorWeights betas{0.7, 0.2, 0.3};
        const MapObjectiveInput in{x, sigma, y, phi, b, w, mu, layout};
        const MapObjectiveTerms t = eval_map_objective(in, betas);
        double fid = 0.0;
        for (Eigen::Index r = 0; r < y.rows(); ++r)
            for (Eigen::Index c = 0; c < y.cols(); ++c) {
                cplx acc = y(r, c);
                for (Eigen::Index i = 0; i < 6; ++i)
                    acc -= phi(r, i) * x(c, i);
                fid += std::norm(acc);
            }
        double sparse = 0.0;
        double quad = 0.0;
        for (Eigen::Index i = 0; i < 6; ++i) {
            sparse += 0.7 * w(i) * x.col(i).norm();
            quad += 0.2 * (x.col(i).adjoint() * sigma[static_cast<std::size_t>(i / 3)] * x.col(i))(0, 0).real();
        }
        CHECK(std::abs(t.fidelity - 0.5 * fid) < 1e-10);
        CHECK(std::abs(t.sparsity - sparse) < 1e-10);
        CHECK(std::abs(t.quadratic - quad) < 1e-10);
        CHECK(std::abs(t.total() - (t.fidelity + t.sparsity + t.quadratic + t.log_det + t.wishart_trace)) < 1e-12);
    }
}
