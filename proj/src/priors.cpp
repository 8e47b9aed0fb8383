#include "juice/priors.hpp"

#include <cmath>

namespace juice {

namespace {

void require_eps(double eps0)
{
    if (!(eps0 > 0.0))
        throw ConfigError("log-sum prior: eps0 must be positive");
}

RVector cluster_mass(const RVector& norms, const ClusterLayout& layout)
{
    if (norms.size() != layout.n_users())
        throw ConfigError("cluster prior: column count does not match layout");
    RVector mass(layout.n_clusters());
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l)
        mass(l) = norms.segment(layout.first_user(l), layout.users_per_cluster()).sum();
    return mass;
}

} // namespace

double eval_separable_prior(const CMatrix& x, double eps0)
{
    require_eps(eps0);
    return (column_norms(x).array() + eps0).log().sum();
}

double eval_cluster_prior(const CMatrix& x, const ClusterLayout& layout, double eps0)
{
    require_eps(eps0);
    return (cluster_mass(column_norms(x), layout).array() + eps0).log().sum();
}

MMWeights mm_weights_outer(const CMatrix& x, const ClusterLayout& layout, double eps0)
{
    require_eps(eps0);
    const RVector mass = cluster_mass(column_norms(x), layout);
    MMWeights w{RVector(layout.n_users()), eps0, LoopKind::outer};
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l)
        w.weights.segment(layout.first_user(l), layout.users_per_cluster())
            .setConstant(1.0 / (mass(l) + eps0));
    return w;
}

MMWeights mm_weights_inner(const CMatrix& x, double eps0)
{
    require_eps(eps0);
    return {(column_norms(x).array() + eps0).inverse().matrix(), eps0, LoopKind::inner};
}

double separable_surrogate(const CMatrix& x, const CMatrix& expansion, double eps0)
{
    const MMWeights w = mm_weights_inner(expansion, eps0);
    const RVector delta = column_norms(x) - column_norms(expansion);
    return eval_separable_prior(expansion, eps0) + w.weights.dot(delta);
}

double cluster_surrogate(const CMatrix& x, const CMatrix& expansion,
                         const ClusterLayout& layout, double eps0)
{
    const MMWeights w = mm_weights_outer(expansion, layout, eps0);
    const RVector delta = column_norms(x) - column_norms(expansion);
    return eval_cluster_prior(expansion, layout, eps0) + w.weights.dot(delta);
}

double log_det_hpd(const CMatrix& a)
{
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw DomainError("log det: matrix is not Hermitian positive definite");
    return 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
}

double eval_wishart_neglog(const CMatrix& sigma, const CMatrix& prior_guess, double d)
{
    if (!(d > 0.0))
        throw ConfigError("Wishart prior: d must be positive");
    Eigen::LLT<CMatrix> b(prior_guess);
    if (b.info() != Eigen::Success)
        throw DomainError("Wishart prior: B is not Hermitian positive definite");
    return -d * log_det_hpd(sigma) + b.solve(sigma).trace().real();
}

MapObjectiveTerms eval_map_objective(const MapObjectiveInput& in, const PriorWeights& betas)
{
    const ClusterLayout& layout = in.layout;
    const Eigen::Index n = layout.n_users();
    if (in.channels.cols() != n || in.pilots.cols() != n || in.weights.size() != n)
        throw ConfigError("objective: user dimension mismatch");
    if (in.pilots.rows() != in.received.rows() || in.received.cols() != in.channels.rows())
        throw ConfigError("objective: received signal dimension mismatch");

    MapObjectiveTerms t;
    t.fidelity = 0.5 * (in.received - in.pilots * in.channels.transpose()).squaredNorm();
    t.sparsity = betas.beta1 * in.weights.dot(column_norms(in.channels));

    const bool covariance_terms = betas.beta2 != 0.0 || betas.beta3 != 0.0 || in.mu.size() > 0;
    if (!covariance_terms)
        return t;
    const double l_size = static_cast<double>(layout.users_per_cluster());
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l) {
        const auto lu = static_cast<std::size_t>(l);
        const CMatrix& sigma = in.precisions[lu];
        const auto block = in.channels.middleCols(layout.first_user(l), layout.users_per_cluster());
        if (betas.beta2 != 0.0)
            t.quadratic += betas.beta2 * (block.adjoint() * sigma * block).trace().real();
        if (in.mu.size() > 0 && in.mu(l) != 0.0)
            t.log_det -= in.mu(l) * log_det_hpd(sigma);
        if (betas.beta3 != 0.0) {
            Eigen::LLT<CMatrix> b(in.prior_guess[lu]);
            t.wishart_trace += betas.beta3 * l_size * b.solve(sigma).trace().real();
        }
    }
    return t;
}

} // namespace juice
