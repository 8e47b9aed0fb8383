#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "juice/types.hpp"

namespace juice {

/// Partition of N users into C equally sized, contiguous clusters.
/// Cluster l holds users [l*L, (l+1)*L).
class ClusterLayout {
public:
    ClusterLayout() = default;
    ClusterLayout(Eigen::Index n_users, Eigen::Index n_clusters);

    Eigen::Index n_users() const noexcept { return n_users_; }
    Eigen::Index n_clusters() const noexcept { return n_clusters_; }
    Eigen::Index users_per_cluster() const noexcept { return per_cluster_; }

    Eigen::Index first_user(Eigen::Index cluster) const noexcept { return cluster * per_cluster_; }
    Eigen::Index cluster_of(UserIndex user) const noexcept { return user / per_cluster_; }
    UserSet members(Eigen::Index cluster) const;

private:
    Eigen::Index n_users_ = 0;
    Eigen::Index n_clusters_ = 0;
    Eigen::Index per_cluster_ = 0;
};

ClusterLayout build_cluster_layout(Eigen::Index n_users, Eigen::Index n_clusters);

/// Per-cluster channel statistics. All users of a cluster share one
/// precision matrix; `covariances[l]` is its inverse.
struct PrecisionSet {
    std::vector<CMatrix> precisions;
    std::vector<CMatrix> covariances;
    RVector powers;
};

enum class ActivityKind { clustered, random };

std::string_view to_string(ActivityKind kind);
ActivityKind parse_activity_kind(std::string_view text);

struct ActivityPattern {
    Eigen::VectorXi gamma;
    UserSet active;  // sorted ascending
    ActivityKind kind = ActivityKind::clustered;
};

/// Geometry of the local scattering model for one array.
struct ScatteringParams {
    double angle_min = -1.0471975511965976;  // -60 deg
    double angle_max = 1.0471975511965976;   // +60 deg
    double angular_std = 0.17453292519943295; // 10 deg
    double spacing = 0.5;                    // wavelengths
    double loading = 1e-4;
};

/// Full synthetic JUICE instance.
struct ProblemInstance {
    ClusterLayout layout;
    CMatrix pilots;              // tau_p x N
    CMatrix channels;            // effective channel X, M x N
    CMatrix received;            // Y, tau_p x M
    double noise_var = 0.0;
    ActivityPattern activity;
    PrecisionSet stats;
    std::vector<CMatrix> prior_guess;  // B_l
    std::uint64_t seed = 0;

    Eigen::Index antennas() const { return channels.rows(); }
    Eigen::Index pilot_length() const { return pilots.rows(); }
};

/// Everything needed to draw a ProblemInstance.
struct SystemConfig {
    Eigen::Index antennas = 8;
    Eigen::Index users = 100;
    Eigen::Index clusters = 10;
    Eigen::Index active_users = 8;
    Eigen::Index active_clusters = 2;
    ActivityKind activity = ActivityKind::clustered;
    Eigen::Index pilot_length = 20;
    ScatteringParams scattering;
    double zeta = 0.1;
    double noise_var = 0.1;
    bool orthonormal_pilots = false;  // requires pilot_length == users
};

/// Local scattering covariance of a ULA with a Gaussian angular density
/// around `nominal_angle`:
///   R(m,n) = exp(j 2 pi s (m-n) sin(t)) exp(-0.5 (2 pi s (m-n) std cos(t))^2),
/// scaled so that trace(R) = M. No diagonal loading is applied here.
CMatrix local_scattering_covariance(Eigen::Index antennas, double nominal_angle,
                                    double angular_std, double spacing);

/// Precision matrices and power control from explicit per-cluster
/// covariances: Sigma_l = (R_l + loading I)^-1, p_i = M / trace(Sigma_l^-1).
PrecisionSet gen_precision_set(const ClusterLayout& layout,
                               const std::vector<CMatrix>& covariances, double loading);

/// Draws one nominal angle per cluster uniformly in [angle_min, angle_max].
PrecisionSet gen_precision_set(const ClusterLayout& layout, Eigen::Index antennas,
                               const ScatteringParams& params, std::uint64_t seed);

/// Complex Bernoulli pilot book with entries (+-1 +- j)/sqrt(2 tau_p).
CMatrix gen_pilots(Eigen::Index tau_p, Eigen::Index n_users, std::uint64_t seed);

/// Unitary DFT columns; only meaningful for tau_p >= n_users.
CMatrix orthonormal_pilots(Eigen::Index tau_p, Eigen::Index n_users);

ActivityPattern sample_activity(const ClusterLayout& layout, ActivityKind kind,
                                Eigen::Index active_users, Eigen::Index active_clusters,
                                std::uint64_t seed);

/// Effective channel X (M x N): column i is sqrt(p_i) h_i for active users,
/// h_i ~ CN(0, Sigma_l^-1), and exactly zero otherwise.
CMatrix sample_channels(const ClusterLayout& layout, const ActivityPattern& activity,
                        const PrecisionSet& stats, std::uint64_t seed);

/// Y = Phi X^T + W, W_ij ~ CN(0, noise_var).
CMatrix synthesize(const CMatrix& pilots, const CMatrix& channels, double noise_var,
                   std::uint64_t seed);

/// Mismatched prior guess B = zeta Psi + (1 - zeta) Sigma, with Psi a random
/// Hermitian PSD matrix scaled to trace(Sigma).
CMatrix build_prior_guess(const CMatrix& precision, double zeta, std::uint64_t seed);

/// Draws a complete instance. Each random component uses its own stream
/// derived from `seed`.
ProblemInstance generate_instance(const SystemConfig& config, std::uint64_t seed);

/// Hermitian part (A + A^H) / 2.
CMatrix hermitian_part(const CMatrix& a);

/// Column Euclidean norms.
RVector column_norms(const CMatrix& x);

} // namespace juice
