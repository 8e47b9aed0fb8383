#pragma once

#include <vector>

#include "juice/model.hpp"
#include "juice/types.hpp"

namespace juice {

enum class LoopKind { outer, inner };

/// Linearization weights of a log-sum prior around the current iterate.
///   outer: w_i = 1 / (sum_{j in C_l} ||x_j|| + eps0) for i in C_l
///   inner: w_i = 1 / (||x_i|| + eps0)
struct MMWeights {
    RVector weights;
    double eps0 = 1e-3;
    LoopKind kind = LoopKind::outer;
};

/// Regularization weights of the relaxed MAP objective.
struct PriorWeights {
    double beta1 = 0.0;  // sparsity prior
    double beta2 = 0.0;  // channel quadratic form / log-det coupling
    double beta3 = 0.0;  // Wishart prior
};

/// sum_i log(||x_i|| + eps0)
double eval_separable_prior(const CMatrix& x, double eps0);

/// sum_l log(sum_{i in C_l} ||x_i|| + eps0)
double eval_cluster_prior(const CMatrix& x, const ClusterLayout& layout, double eps0);

MMWeights mm_weights_outer(const CMatrix& x, const ClusterLayout& layout, double eps0);
MMWeights mm_weights_inner(const CMatrix& x, double eps0);

/// Tangent majorizers of the two log-sum priors, expanded at `expansion`
/// and evaluated at `x`. The additive constant is restored so that the
/// value coincides with the exact prior at the expansion point.
double separable_surrogate(const CMatrix& x, const CMatrix& expansion, double eps0);
double cluster_surrogate(const CMatrix& x, const CMatrix& expansion,
                         const ClusterLayout& layout, double eps0);

/// log det of an HPD matrix via Cholesky. Throws DomainError otherwise.
double log_det_hpd(const CMatrix& a);

/// Wishart negative log-density without normalization:
///   -d log det(Sigma) + trace(B^-1 Sigma)
double eval_wishart_neglog(const CMatrix& sigma, const CMatrix& prior_guess, double d);

/// Individual terms of the MM-linearized MAP objective
///   1/2 ||Y - Phi X^T||^2 + beta1 sum_i w_i ||x_i||
///   + beta2 sum_l sum_{i in C_l} x_i^H Sigma_l x_i
///   - sum_l mu_l log det Sigma_l + beta3 L sum_l tr(B_l^-1 Sigma_l)
struct MapObjectiveTerms {
    double fidelity = 0.0;
    double sparsity = 0.0;
    double quadratic = 0.0;
    double log_det = 0.0;
    double wishart_trace = 0.0;

    double total() const { return fidelity + sparsity + quadratic + log_det + wishart_trace; }
};

struct MapObjectiveInput {
    const CMatrix& channels;                   // X, M x N
    const std::vector<CMatrix>& precisions;    // Sigma_l
    const CMatrix& received;                   // Y
    const CMatrix& pilots;                     // Phi
    const std::vector<CMatrix>& prior_guess;   // B_l
    const RVector& weights;                    // MM weights, frozen
    const RVector& mu;                         // per-cluster log-det coefficient, frozen
    const ClusterLayout& layout;
};

MapObjectiveTerms eval_map_objective(const MapObjectiveInput& in, const PriorWeights& betas);

} // namespace juice
