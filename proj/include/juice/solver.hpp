#pragma once

#include <optional>
#include <vector>

#include "juice/model.hpp"
#include "juice/priors.hpp"
#include "juice/types.hpp"

namespace juice {

/// Which log-sum prior drives the MM reweighting.
enum class Reweighting {
    cluster_then_user,  // outer loop on cluster weights q, inner loop on user weights g
    user_only,          // user weights g on all N users, no inner stage
};

/// Starting point of the primal iterates.
enum class Initialization {
    zero,   // X = Z = V = 0
    ridge,  // X = Z = V = Y^T Phi^* (Phi^T Phi^* + rho I)^-1
};

struct SolverParams {
    PriorWeights betas{1.0, 1e-2, 1e-2};
    double rho = 1.0;
    double eps0 = 1e-3;
    /// Activity threshold as a fraction of the largest column norm.
    double eps_detect_rel = 0.1;
    /// Stop once ||X^(k) - X^(k-1)||_F drops below this.
    double eps_conv = 1e-4;
    int k_c_max = 200;
    int k_u_max = 50;
    /// Outer iterations between two inner-loop invocations.
    int inner_period = 10;
    /// Outer iterations run with unit MM weights (plain l2,1) before the
    /// reweighting starts. From X = 0 the weights 1/eps0 would zero every column.
    int warmup_iterations = 20;
    /// Wishart shape d = v - M + 1.
    double wishart_d = 1.0;
    /// Keep the p_i^M factor in the inner-loop log-det coefficient.
    bool inner_power_factor = true;
    Reweighting reweighting = Reweighting::cluster_then_user;
    Initialization init = Initialization::zero;
    bool record_diagnostics = false;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
    bool updates_covariance() const { return betas.beta2 != 0.0 || betas.beta3 != 0.0; }
};

/// Caches (Phi^T Phi^* + rho I_N)^-1 for repeated Z updates. When tau_p < N
/// the inverse is applied through the tau_p x tau_p Woodbury form.
class GramSolver {
public:
    GramSolver(const CMatrix& pilots, double rho);

    /// R (Phi^T Phi^* + rho I)^-1 for R of size M x N.
    CMatrix apply(const CMatrix& rhs) const;
    /// Explicit N x N inverse, for tests.
    CMatrix inverse() const;

    double rho() const noexcept { return rho_; }
    Eigen::Index users() const noexcept { return users_; }

private:
    double rho_;
    Eigen::Index users_;
    bool woodbury_;
    CMatrix pilots_conj_;   // Phi^*  (tau_p x N)
    CMatrix small_inv_;     // (rho I_tau + Phi^* Phi^T)^-1, Woodbury path
    CMatrix full_inv_;      // direct path
};

/// Primal and dual iterates of one ADMM instance.
struct AdmmState {
    CMatrix x, z, v;
    CMatrix dual_z, dual_v;
    std::vector<CMatrix> sigma;
};

/// Sub-problem the ADMM iterations operate on. The inner loop uses a copy
/// restricted to the detected clusters.
struct AdmmProblem {
    CMatrix pilots;                   // tau_p x N
    CMatrix received;                 // tau_p x M
    ClusterLayout layout;
    std::vector<CMatrix> prior_guess; // B_l, may be empty if covariances are not updated
    RVector powers;
};

// --- single-step closed-form updates ------------------------------------

CMatrix update_z(const CMatrix& x, const CMatrix& dual_z, const CMatrix& received,
                 const CMatrix& pilots, const GramSolver& gram);

/// Exact minimizer of beta2 sum_i v_i^H Sigma_l v_i + rho/2 ||X - V + Lambda_v / rho||^2:
///   v_i = (2 beta2 Sigma_l + rho I)^-1 (rho x_i + lambda_v,i)
CMatrix update_v(const CMatrix& x, const CMatrix& dual_v, const std::vector<CMatrix>& sigma,
                 double rho, double beta2, const ClusterLayout& layout);

/// Group shrinkage of C = (Z + V - (Lambda_z + Lambda_v)/rho) / 2 with
/// per-column thresholds alpha_i / (2 rho).
CMatrix update_x(const CMatrix& z, const CMatrix& v, const CMatrix& dual_z,
                 const CMatrix& dual_v, const RVector& alpha, double rho);

/// alpha_i = max(0, w_i (beta1 - beta2 p_i^M log det Sigma_l)).
RVector compute_alpha(const RVector& weights, const std::vector<CMatrix>& sigma,
                      const PriorWeights& betas, const RVector& powers,
                      const ClusterLayout& layout, Eigen::Index antennas,
                      bool power_factor = true);

/// mu_l = beta2 sum_{i in C_l} p_i^M w_i ||x_i|| + beta3 L d.
RVector compute_mu(const RVector& weights, const CMatrix& x, const RVector& powers,
                   const PriorWeights& betas, double d, const ClusterLayout& layout,
                   bool power_factor = true);

/// Stationary point of beta2 sum v^H Sigma v - mu log det Sigma + beta3 L tr(B^-1 Sigma):
///   Sigma_l = mu_l (beta2 sum_{i in C_l} v_i v_i^H + beta3 L B_l^-1)^-1
std::vector<CMatrix> update_sigma(const CMatrix& v, const std::vector<CMatrix>& prior_guess,
                                  const RVector& mu, const PriorWeights& betas,
                                  const ClusterLayout& layout);

void update_duals(const CMatrix& x, const CMatrix& z, const CMatrix& v, CMatrix& dual_z,
                  CMatrix& dual_v, double rho);

/// Clusters holding at least one column with norm above `threshold`.
std::vector<Eigen::Index> detect_active_clusters(const CMatrix& x, const ClusterLayout& layout,
                                                 double threshold);
UserSet cluster_union(const std::vector<Eigen::Index>& clusters, const ClusterLayout& layout);

/// Augmented Lagrangian with frozen alpha and mu (the X-penalty uses alpha).
double augmented_lagrangian(const AdmmProblem& problem, const AdmmState& state,
                            const RVector& alpha, const RVector& mu,
                            const PriorWeights& betas, double rho);

/// Frozen per-iteration quantities derived from the MM weights.
struct IterationWeights {
    RVector alpha;
    RVector mu;
};

IterationWeights iteration_weights(const AdmmProblem& problem, const AdmmState& state,
                                   const RVector& mm_weights, const SolverParams& params,
                                   bool power_factor);

/// One ADMM sweep: Z, V, X, Sigma, then the duals.
void admm_iteration(const AdmmProblem& problem, const GramSolver& gram, AdmmState& state,
                    const IterationWeights& w, const SolverParams& params);

// --- full algorithm -------------------------------------------------------

enum class Stage { outer, inner };

struct IterationRecord {
    int iteration = 0;       // global sweep counter
    Stage stage = Stage::outer;
    double objective = 0.0;  // MM-linearized objective at the new iterate
    double residual_z = 0.0; // ||X - Z||_F
    double residual_v = 0.0; // ||X - V||_F
    double change = 0.0;     // ||X^(k) - X^(k-1)||_F
    Eigen::Index detected = 0;  // |S_hat|
};

struct JuiceSolution {
    CMatrix channels;                 // X_hat
    std::vector<CMatrix> precisions;  // Sigma_hat
    UserSet support;                  // per-user thresholding of X_hat
    std::vector<Eigen::Index> active_clusters;
    int outer_iterations = 0;
    int total_iterations = 0;
    bool converged = false;
    double seconds = 0.0;
    std::vector<IterationRecord> diagnostics;
};

/// Two-level MAP-ADMM: outer loop with cluster-sparsity weights, inner loop
/// with per-user weights on the detected clusters every `inner_period`
/// outer iterations and once more before returning.
JuiceSolution solve(const CMatrix& received, const CMatrix& pilots, const ClusterLayout& layout,
                    const std::vector<CMatrix>& prior_guess, const RVector& powers,
                    const SolverParams& params);

} // namespace juice
