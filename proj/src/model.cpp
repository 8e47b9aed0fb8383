#include "juice/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "juice/rng.hpp"

namespace juice {

namespace {

// Stream identifiers for generate_instance.
enum Stream : std::uint64_t {
    kAngles = 1,
    kPilots = 2,
    kActivity = 3,
    kChannels = 4,
    kNoise = 5,
    kPriorGuess = 6,
};

CMatrix hpd_inverse(const CMatrix& a, const char* what)
{
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw DomainError(std::string(what) + ": matrix is not positive definite");
    return hermitian_part(llt.solve(CMatrix::Identity(a.rows(), a.cols())));
}

} // namespace

ClusterLayout::ClusterLayout(Eigen::Index n_users, Eigen::Index n_clusters)
{
    if (n_users <= 0 || n_clusters <= 0)
        throw ConfigError("cluster layout: counts must be positive");
    if (n_users % n_clusters != 0)
        throw ConfigError("cluster layout: " + std::to_string(n_users) +
                          " users cannot be split evenly into " +
                          std::to_string(n_clusters) + " clusters");
    n_users_ = n_users;
    n_clusters_ = n_clusters;
    per_cluster_ = n_users / n_clusters;
}

UserSet ClusterLayout::members(Eigen::Index cluster) const
{
    UserSet out(static_cast<std::size_t>(per_cluster_));
    std::iota(out.begin(), out.end(), first_user(cluster));
    return out;
}

ClusterLayout build_cluster_layout(Eigen::Index n_users, Eigen::Index n_clusters)
{
    return ClusterLayout(n_users, n_clusters);
}

std::string_view to_string(ActivityKind kind)
{
    return kind == ActivityKind::clustered ? "clustered" : "random";
}

ActivityKind parse_activity_kind(std::string_view text)
{
    if (text == "clustered")
        return ActivityKind::clustered;
    if (text == "random")
        return ActivityKind::random;
    throw ConfigError("unknown activity kind '" + std::string(text) + "'");
}

CMatrix hermitian_part(const CMatrix& a)
{
    return 0.5 * (a + a.adjoint());
}

RVector column_norms(const CMatrix& x)
{
    return x.colwise().norm().transpose();
}

CMatrix local_scattering_covariance(Eigen::Index antennas, double nominal_angle,
                                    double angular_std, double spacing)
{
    if (antennas < 1)
        throw ConfigError("covariance: need at least one antenna");
    if (!(angular_std > 0.0))
        throw ConfigError("covariance: angular std must be positive");

    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double s = std::sin(nominal_angle);
    const double c = std::cos(nominal_angle);
    CMatrix r(antennas, antennas);
    for (Eigen::Index m = 0; m < antennas; ++m) {
        for (Eigen::Index n = 0; n < antennas; ++n) {
            const double dist = static_cast<double>(m - n) * spacing;
            const double spread = two_pi * dist * angular_std * c;
            r(m, n) = std::polar(std::exp(-0.5 * spread * spread), two_pi * dist * s);
        }
    }
    // Diagonal is already 1, i.e. trace(R) = M.
    return r;
}

PrecisionSet gen_precision_set(const ClusterLayout& layout,
                               const std::vector<CMatrix>& covariances, double loading)
{
    if (static_cast<Eigen::Index>(covariances.size()) != layout.n_clusters())
        throw ConfigError("precision set: one covariance per cluster required");

    PrecisionSet out;
    out.powers.resize(layout.n_users());
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l) {
        const CMatrix& r = covariances[static_cast<std::size_t>(l)];
        const Eigen::Index m = r.rows();
        CMatrix cov = hermitian_part(r);
        cov.diagonal().array() += loading;
        const double power = static_cast<double>(m) / cov.trace().real();
        out.precisions.push_back(hpd_inverse(cov, "precision set"));
        out.covariances.push_back(std::move(cov));
        out.powers.segment(layout.first_user(l), layout.users_per_cluster()).setConstant(power);
    }
    return out;
}

PrecisionSet gen_precision_set(const ClusterLayout& layout, Eigen::Index antennas,
                               const ScatteringParams& params, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> angle(params.angle_min, params.angle_max);
    std::vector<CMatrix> covariances;
    covariances.reserve(static_cast<std::size_t>(layout.n_clusters()));
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l)
        covariances.push_back(local_scattering_covariance(antennas, angle(rng),
                                                          params.angular_std, params.spacing));
    return gen_precision_set(layout, covariances, params.loading);
}

CMatrix gen_pilots(Eigen::Index tau_p, Eigen::Index n_users, std::uint64_t seed)
{
    if (tau_p < 1 || n_users < 1)
        throw ConfigError("pilots: dimensions must be positive");
    Rng rng(seed);
    std::bernoulli_distribution coin(0.5);
    const double scale = 1.0 / std::sqrt(2.0 * static_cast<double>(tau_p));
    CMatrix phi(tau_p, n_users);
    for (Eigen::Index j = 0; j < n_users; ++j) {
        for (Eigen::Index i = 0; i < tau_p; ++i) {
            const double re = coin(rng) ? 1.0 : -1.0;
            const double im = coin(rng) ? 1.0 : -1.0;
            phi(i, j) = cplx(re, im) * scale;
        }
    }
    return phi;
}

CMatrix orthonormal_pilots(Eigen::Index tau_p, Eigen::Index n_users)
{
    if (tau_p < n_users)
        throw ConfigError("orthonormal pilots need tau_p >= number of users");
    CMatrix phi(tau_p, n_users);
    const double scale = 1.0 / std::sqrt(static_cast<double>(tau_p));
    for (Eigen::Index j = 0; j < n_users; ++j)
        for (Eigen::Index i = 0; i < tau_p; ++i)
            phi(i, j) = std::polar(scale, -2.0 * std::numbers::pi * static_cast<double>(i * j) /
                                              static_cast<double>(tau_p));
    return phi;
}

ActivityPattern sample_activity(const ClusterLayout& layout, ActivityKind kind,
                                Eigen::Index active_users, Eigen::Index active_clusters,
                                std::uint64_t seed)
{
    const Eigen::Index n = layout.n_users();
    if (active_users < 0 || active_users > n)
        throw ConfigError("activity: active user count out of range");

    Rng rng(seed);
    ActivityPattern out;
    out.kind = kind;
    out.gamma = Eigen::VectorXi::Zero(n);

    auto sample_without_replacement = [&rng](Eigen::Index population, Eigen::Index count) {
        std::vector<Eigen::Index> pool(static_cast<std::size_t>(population));
        std::iota(pool.begin(), pool.end(), Eigen::Index{0});
        // Partial Fisher-Yates.
        for (Eigen::Index k = 0; k < count; ++k) {
            std::uniform_int_distribution<Eigen::Index> pick(k, population - 1);
            std::swap(pool[static_cast<std::size_t>(k)],
                      pool[static_cast<std::size_t>(pick(rng))]);
        }
        pool.resize(static_cast<std::size_t>(count));
        return pool;
    };

    if (active_users > 0) {
        if (kind == ActivityKind::random) {
            for (Eigen::Index i : sample_without_replacement(n, active_users))
                out.gamma(i) = 1;
        } else {
            if (active_clusters < 1 || active_clusters > layout.n_clusters())
                throw ConfigError("activity: active cluster count out of range");
            if (active_users % active_clusters != 0)
                throw ConfigError("activity: active users must divide evenly among active clusters");
            const Eigen::Index per_cluster = active_users / active_clusters;
            if (per_cluster > layout.users_per_cluster())
                throw ConfigError("activity: more active users per cluster than cluster members");
            for (Eigen::Index l : sample_without_replacement(layout.n_clusters(), active_clusters))
                for (Eigen::Index k : sample_without_replacement(layout.users_per_cluster(), per_cluster))
                    out.gamma(layout.first_user(l) + k) = 1;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (out.gamma(i) != 0)
            out.active.push_back(i);
    return out;
}

CMatrix sample_channels(const ClusterLayout& layout, const ActivityPattern& activity,
                        const PrecisionSet& stats, std::uint64_t seed)
{
    if (stats.covariances.empty())
        throw ConfigError("channels: empty precision set");
    const Eigen::Index m = stats.covariances.front().rows();
    Rng rng(seed);

    std::vector<CMatrix> roots;
    roots.reserve(stats.covariances.size());
    for (const CMatrix& cov : stats.covariances) {
        Eigen::LLT<CMatrix> llt(cov);
        if (llt.info() != Eigen::Success)
            throw DomainError("channels: covariance is not positive definite");
        roots.push_back(llt.matrixL());
    }

    CMatrix x = CMatrix::Zero(m, layout.n_users());
    for (UserIndex i : activity.active) {
        CVector w(m);
        for (Eigen::Index k = 0; k < m; ++k)
            w(k) = standard_complex_normal(rng);
        x.col(i) = std::sqrt(stats.powers(i)) *
                   (roots[static_cast<std::size_t>(layout.cluster_of(i))] * w);
    }
    return x;
}

CMatrix synthesize(const CMatrix& pilots, const CMatrix& channels, double noise_var,
                   std::uint64_t seed)
{
    if (pilots.cols() != channels.cols())
        throw ConfigError("synthesize: pilot book and channel matrix disagree on user count");
    if (noise_var < 0.0)
        throw ConfigError("synthesize: negative noise variance");
    CMatrix y = pilots * channels.transpose();
    if (noise_var > 0.0) {
        Rng rng(seed);
        y += std::sqrt(noise_var) * standard_complex_normal(y.rows(), y.cols(), rng);
    }
    return y;
}

CMatrix build_prior_guess(const CMatrix& precision, double zeta, std::uint64_t seed)
{
    if (zeta < 0.0 || zeta > 1.0)
        throw ConfigError("prior guess: zeta must lie in [0, 1]");
    const Eigen::Index m = precision.rows();
    Rng rng(seed);
    const CMatrix a = standard_complex_normal(m, m, rng);
    CMatrix psi = hermitian_part(a * a.adjoint());
    psi *= precision.trace().real() / psi.trace().real();

    CMatrix b = hermitian_part(zeta * psi + (1.0 - zeta) * precision);
    Eigen::LLT<CMatrix> llt(b);
    if (llt.info() != Eigen::Success)
        throw DomainError("prior guess is not positive definite");
    return b;
}

ProblemInstance generate_instance(const SystemConfig& config, std::uint64_t seed)
{
    ProblemInstance inst;
    inst.seed = seed;
    inst.layout = build_cluster_layout(config.users, config.clusters);
    inst.noise_var = config.noise_var;
    inst.stats = gen_precision_set(inst.layout, config.antennas, config.scattering,
                                   derive_seed(seed, kAngles));
    inst.pilots = config.orthonormal_pilots
                      ? orthonormal_pilots(config.pilot_length, config.users)
                      : gen_pilots(config.pilot_length, config.users, derive_seed(seed, kPilots));
    inst.activity = sample_activity(inst.layout, config.activity, config.active_users,
                                    config.active_clusters, derive_seed(seed, kActivity));
    inst.channels = sample_channels(inst.layout, inst.activity, inst.stats,
                                    derive_seed(seed, kChannels));
    inst.received = synthesize(inst.pilots, inst.channels, config.noise_var,
                               derive_seed(seed, kNoise));
    const std::uint64_t guess_seed = derive_seed(seed, kPriorGuess);
    for (Eigen::Index l = 0; l < inst.layout.n_clusters(); ++l)
        inst.prior_guess.push_back(build_prior_guess(inst.stats.precisions[static_cast<std::size_t>(l)],
                                                     config.zeta,
                                                     derive_seed(guess_seed, static_cast<std::uint64_t>(l))));
    return inst;
}

} // namespace juice
