#include "juice/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "juice/metrics.hpp"

namespace juice {

namespace {

CMatrix hpd_inverse_or_fault(const CMatrix& a, const char* what)
{
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw SolverFault(std::string(what) + ": matrix lost positive definiteness");
    return hermitian_part(llt.solve(CMatrix::Identity(a.rows(), a.cols())));
}

double power_scale(double power, Eigen::Index antennas, bool enabled)
{
    // p^M evaluated in the log domain.
    return enabled ? std::exp(static_cast<double>(antennas) * std::log(power)) : 1.0;
}

AdmmProblem restrict_problem(const AdmmProblem& full, const std::vector<Eigen::Index>& clusters)
{
    const Eigen::Index per = full.layout.users_per_cluster();
    const auto count = static_cast<Eigen::Index>(clusters.size());
    AdmmProblem sub;
    sub.received = full.received;
    sub.layout = ClusterLayout(count * per, count);
    sub.pilots.resize(full.pilots.rows(), count * per);
    sub.powers.resize(count * per);
    for (Eigen::Index k = 0; k < count; ++k) {
        const Eigen::Index first = full.layout.first_user(clusters[static_cast<std::size_t>(k)]);
        sub.pilots.middleCols(k * per, per) = full.pilots.middleCols(first, per);
        sub.powers.segment(k * per, per) = full.powers.segment(first, per);
        if (!full.prior_guess.empty())
            sub.prior_guess.push_back(full.prior_guess[static_cast<std::size_t>(clusters[static_cast<std::size_t>(k)])]);
    }
    return sub;
}

CMatrix gather_columns(const CMatrix& m, const std::vector<Eigen::Index>& clusters,
                       const ClusterLayout& layout)
{
    const Eigen::Index per = layout.users_per_cluster();
    CMatrix out(m.rows(), static_cast<Eigen::Index>(clusters.size()) * per);
    for (std::size_t k = 0; k < clusters.size(); ++k)
        out.middleCols(static_cast<Eigen::Index>(k) * per, per) =
            m.middleCols(layout.first_user(clusters[k]), per);
    return out;
}

void scatter_columns(const CMatrix& sub, CMatrix& m, const std::vector<Eigen::Index>& clusters,
                     const ClusterLayout& layout)
{
    const Eigen::Index per = layout.users_per_cluster();
    for (std::size_t k = 0; k < clusters.size(); ++k)
        m.middleCols(layout.first_user(clusters[k]), per) =
            sub.middleCols(static_cast<Eigen::Index>(k) * per, per);
}

} // namespace

void SolverParams::validate() const
{
    if (!(rho > 0.0))
        throw ConfigError("solver: rho must be positive");
    if (betas.beta1 < 0.0 || betas.beta2 < 0.0 || betas.beta3 < 0.0)
        throw ConfigError("solver: prior weights must be nonnegative");
    if (betas.beta2 > 0.0 && !(betas.beta3 > 0.0))
        throw ConfigError("solver: beta3 must be positive when beta2 is (mu_l would vanish)");
    if (!(eps0 > 0.0))
        throw ConfigError("solver: eps0 must be positive");
    if (!(eps_detect_rel > 0.0) || eps_detect_rel >= 1.0)
        throw ConfigError("solver: relative detection threshold must lie in (0, 1)");
    if (eps_conv < 0.0)
        throw ConfigError("solver: eps_conv must be nonnegative");
    if (k_c_max < 1 || k_u_max < 1 || inner_period < 1)
        throw ConfigError("solver: iteration caps and inner period must be at least 1");
    if (warmup_iterations < 0)
        throw ConfigError("solver: warmup_iterations must be nonnegative");
    if (!(wishart_d > 0.0))
        throw ConfigError("solver: Wishart d must be positive");
}

GramSolver::GramSolver(const CMatrix& pilots, double rho)
    : rho_(rho), users_(pilots.cols()), woodbury_(pilots.rows() < pilots.cols())
{
    if (!(rho > 0.0))
        throw ConfigError("gram: rho must be positive");
    if (woodbury_) {
        pilots_conj_ = pilots.conjugate();
        CMatrix small = pilots_conj_ * pilots.transpose();
        small.diagonal().array() += rho;
        small_inv_ = hpd_inverse_or_fault(small, "gram");
    } else {
        CMatrix gram = pilots.transpose() * pilots.conjugate();
        gram.diagonal().array() += rho;
        full_inv_ = hpd_inverse_or_fault(gram, "gram");
    }
}

CMatrix GramSolver::apply(const CMatrix& rhs) const
{
    if (!woodbury_)
        return rhs * full_inv_;
    // (rho I + A B)^-1 = (I - A (rho I + B A)^-1 B) / rho with A = Phi^T, B = Phi^*.
    const CMatrix ra = rhs * pilots_conj_.adjoint();  // R Phi^T
    return (rhs - (ra * small_inv_) * pilots_conj_) / rho_;
}

CMatrix GramSolver::inverse() const
{
    return apply(CMatrix::Identity(users_, users_));
}

CMatrix update_z(const CMatrix& x, const CMatrix& dual_z, const CMatrix& received,
                 const CMatrix& pilots, const GramSolver& gram)
{
    return gram.apply(gram.rho() * x + dual_z + received.transpose() * pilots.conjugate());
}

CMatrix update_v(const CMatrix& x, const CMatrix& dual_v, const std::vector<CMatrix>& sigma,
                 double rho, double beta2, const ClusterLayout& layout)
{
    const CMatrix rhs = rho * x + dual_v;
    if (beta2 == 0.0)
        return rhs / rho;
    const Eigen::Index per = layout.users_per_cluster();
    CMatrix v(x.rows(), x.cols());
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l) {
        CMatrix system = 2.0 * beta2 * sigma[static_cast<std::size_t>(l)];
        system.diagonal().array() += rho;
        Eigen::LLT<CMatrix> llt(hermitian_part(system));
        if (llt.info() != Eigen::Success)
            throw SolverFault("V update: system is not positive definite");
        v.middleCols(layout.first_user(l), per) = llt.solve(rhs.middleCols(layout.first_user(l), per));
    }
    return v;
}

CMatrix update_x(const CMatrix& z, const CMatrix& v, const CMatrix& dual_z,
                 const CMatrix& dual_v, const RVector& alpha, double rho)
{
    CMatrix c = 0.5 * (z + v - (dual_z + dual_v) / rho);
    for (Eigen::Index i = 0; i < c.cols(); ++i) {
        const double norm = c.col(i).norm();
        const double threshold = std::max(0.0, alpha(i)) / (2.0 * rho);
        if (norm <= threshold || norm == 0.0)
            c.col(i).setZero();
        else
            c.col(i) *= 1.0 - threshold / norm;
    }
    return c;
}

RVector compute_alpha(const RVector& weights, const std::vector<CMatrix>& sigma,
                      const PriorWeights& betas, const RVector& powers,
                      const ClusterLayout& layout, Eigen::Index antennas, bool power_factor)
{
    RVector alpha(weights.size());
    const Eigen::Index per = layout.users_per_cluster();
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l) {
        const double log_det = betas.beta2 != 0.0 ? log_det_hpd(sigma[static_cast<std::size_t>(l)]) : 0.0;
        for (Eigen::Index i = layout.first_user(l); i < layout.first_user(l) + per; ++i) {
            const double coupling = betas.beta2 * power_scale(powers(i), antennas, power_factor) * log_det;
            alpha(i) = std::max(0.0, weights(i) * (betas.beta1 - coupling));
        }
    }
    return alpha;
}

RVector compute_mu(const RVector& weights, const CMatrix& x, const RVector& powers,
                   const PriorWeights& betas, double d, const ClusterLayout& layout,
                   bool power_factor)
{
    const RVector norms = column_norms(x);
    const Eigen::Index per = layout.users_per_cluster();
    RVector mu(layout.n_clusters());
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l) {
        double acc = 0.0;
        for (Eigen::Index i = layout.first_user(l); i < layout.first_user(l) + per; ++i)
            acc += power_scale(powers(i), x.rows(), power_factor) * weights(i) * norms(i);
        mu(l) = betas.beta2 * acc + betas.beta3 * static_cast<double>(per) * d;
    }
    return mu;
}

std::vector<CMatrix> update_sigma(const CMatrix& v, const std::vector<CMatrix>& prior_guess,
                                  const RVector& mu, const PriorWeights& betas,
                                  const ClusterLayout& layout)
{
    const Eigen::Index per = layout.users_per_cluster();
    const double l_size = static_cast<double>(per);
    std::vector<CMatrix> out;
    out.reserve(static_cast<std::size_t>(layout.n_clusters()));
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l) {
        if (!(mu(l) > 0.0))
            throw SolverFault("Sigma update: nonpositive log-det coefficient in cluster " +
                              std::to_string(l));
        const auto block = v.middleCols(layout.first_user(l), per);
        CMatrix system = betas.beta2 * (block * block.adjoint());
        if (betas.beta3 != 0.0) {
            Eigen::LLT<CMatrix> b(prior_guess[static_cast<std::size_t>(l)]);
            if (b.info() != Eigen::Success)
                throw SolverFault("Sigma update: prior guess is not positive definite");
            system += betas.beta3 * l_size * hermitian_part(b.solve(CMatrix::Identity(v.rows(), v.rows())));
        }
        CMatrix sigma = mu(l) * hpd_inverse_or_fault(hermitian_part(system), "Sigma update");
        Eigen::LLT<CMatrix> check(sigma);
        if (check.info() != Eigen::Success)
            throw SolverFault("Sigma update: result is not positive definite");
        out.push_back(std::move(sigma));
    }
    return out;
}

void update_duals(const CMatrix& x, const CMatrix& z, const CMatrix& v, CMatrix& dual_z,
                  CMatrix& dual_v, double rho)
{
    dual_z += rho * (x - z);
    dual_v += rho * (x - v);
}

std::vector<Eigen::Index> detect_active_clusters(const CMatrix& x, const ClusterLayout& layout,
                                                 double threshold)
{
    const RVector norms = column_norms(x);
    std::vector<Eigen::Index> clusters;
    for (Eigen::Index l = 0; l < layout.n_clusters(); ++l)
        if ((norms.segment(layout.first_user(l), layout.users_per_cluster()).array() > threshold).any())
            clusters.push_back(l);
    return clusters;
}

UserSet cluster_union(const std::vector<Eigen::Index>& clusters, const ClusterLayout& layout)
{
    UserSet users;
    for (Eigen::Index l : clusters) {
        const UserSet m = layout.members(l);
        users.insert(users.end(), m.begin(), m.end());
    }
    return users;
}

double augmented_lagrangian(const AdmmProblem& problem, const AdmmState& s, const RVector& alpha,
                            const RVector& mu, const PriorWeights& betas, double rho)
{
    const ClusterLayout& layout = problem.layout;
    double value = 0.5 * (problem.received - problem.pilots * s.z.transpose()).squaredNorm();
    value += alpha.dot(column_norms(s.x));
    if (betas.beta2 != 0.0 || betas.beta3 != 0.0) {
        const Eigen::Index per = layout.users_per_cluster();
        for (Eigen::Index l = 0; l < layout.n_clusters(); ++l) {
            const auto lu = static_cast<std::size_t>(l);
            const auto block = s.v.middleCols(layout.first_user(l), per);
            value += betas.beta2 * (block.adjoint() * s.sigma[lu] * block).trace().real();
            value -= mu(l) * log_det_hpd(s.sigma[lu]);
            Eigen::LLT<CMatrix> b(problem.prior_guess[lu]);
            value += betas.beta3 * static_cast<double>(per) * b.solve(s.sigma[lu]).trace().real();
        }
    }
    value += 0.5 * rho * (s.x - s.v + s.dual_v / rho).squaredNorm();
    value += 0.5 * rho * (s.x - s.z + s.dual_z / rho).squaredNorm();
    value -= (s.dual_z.squaredNorm() + s.dual_v.squaredNorm()) / (2.0 * rho);
    return value;
}

IterationWeights iteration_weights(const AdmmProblem& problem, const AdmmState& state,
                                   const RVector& mm_weights, const SolverParams& params,
                                   bool power_factor)
{
    IterationWeights w;
    w.alpha = compute_alpha(mm_weights, state.sigma, params.betas, problem.powers, problem.layout,
                            state.x.rows(), power_factor);
    if (params.updates_covariance())
        w.mu = compute_mu(mm_weights, state.x, problem.powers, params.betas, params.wishart_d,
                          problem.layout, power_factor);
    return w;
}

void admm_iteration(const AdmmProblem& problem, const GramSolver& gram, AdmmState& s,
                    const IterationWeights& w, const SolverParams& params)
{
    const double rho = params.rho;
    s.z = update_z(s.x, s.dual_z, problem.received, problem.pilots, gram);
    s.v = update_v(s.x, s.dual_v, s.sigma, rho, params.betas.beta2, problem.layout);
    s.x = update_x(s.z, s.v, s.dual_z, s.dual_v, w.alpha, rho);
    if (params.updates_covariance())
        s.sigma = update_sigma(s.v, problem.prior_guess, w.mu, params.betas, problem.layout);
    update_duals(s.x, s.z, s.v, s.dual_z, s.dual_v, rho);
}

namespace {

class JuiceRunner {
public:
    JuiceRunner(AdmmProblem problem, const SolverParams& params, JuiceSolution& out)
        : problem_(std::move(problem)), params_(params), out_(out), gram_(problem_.pilots, params.rho)
    {}

    void run()
    {
        const Eigen::Index m = problem_.received.cols();
        const Eigen::Index n = problem_.layout.n_users();
        state_.x = CMatrix::Zero(m, n);
        state_.dual_z = CMatrix::Zero(m, n);
        state_.dual_v = CMatrix::Zero(m, n);
        if (params_.init == Initialization::ridge)
            state_.x = gram_.apply(problem_.received.transpose() * problem_.pilots.conjugate());
        state_.z = state_.x;
        state_.v = state_.x;
        if (params_.updates_covariance())
            state_.sigma = problem_.prior_guess;
        else
            state_.sigma.assign(static_cast<std::size_t>(problem_.layout.n_clusters()),
                                CMatrix::Identity(m, m));

        const bool two_level = params_.reweighting == Reweighting::cluster_then_user;
        bool inner_ran_last = false;
        for (int k = 1; k <= params_.k_c_max; ++k) {
            const CMatrix previous = state_.x;
            MMWeights mm = two_level ? mm_weights_outer(state_.x, problem_.layout, params_.eps0)
                                     : mm_weights_inner(state_.x, params_.eps0);
            if (k <= params_.warmup_iterations)
                mm.weights.setOnes();
            const IterationWeights w = iteration_weights(problem_, state_, mm.weights, params_, true);
            admm_iteration(problem_, gram_, state_, w, params_);
            check_finite(state_.x);
            ++out_.total_iterations;
            out_.outer_iterations = k;
            record(Stage::outer, problem_, state_, mm.weights, w.mu, previous);

            inner_ran_last = false;
            if (two_level && k % params_.inner_period == 0) {
                inner_stage();
                inner_ran_last = true;
            }
            if (k > params_.warmup_iterations && (state_.x - previous).norm() < params_.eps_conv) {
                out_.converged = true;
                break;
            }
        }
        if (two_level && !inner_ran_last)
            inner_stage();

        out_.channels = state_.x;
        out_.precisions = state_.sigma;
        const double peak = column_norms(state_.x).maxCoeff();
        out_.support = peak > 0.0 ? detect_support(state_.x, params_.eps_detect_rel * peak) : UserSet{};
    }

private:
    void inner_stage()
    {
        const RVector norms = column_norms(state_.x);
        const double threshold = params_.eps_detect_rel * norms.maxCoeff();
        const std::vector<Eigen::Index> clusters =
            norms.maxCoeff() > 0.0 ? detect_active_clusters(state_.x, problem_.layout, threshold)
                                   : std::vector<Eigen::Index>{};
        out_.active_clusters = clusters;
        if (clusters.empty()) {
            state_.x.setZero();
            return;
        }

        if (!inner_gram_ || clusters != inner_clusters_) {
            inner_problem_ = restrict_problem(problem_, clusters);
            inner_gram_.emplace(inner_problem_.pilots, params_.rho);
            inner_clusters_ = clusters;
        }
        const ClusterLayout& layout = problem_.layout;
        AdmmState sub;
        sub.x = gather_columns(state_.x, clusters, layout);
        sub.z = gather_columns(state_.z, clusters, layout);
        sub.v = gather_columns(state_.v, clusters, layout);
        sub.dual_z = gather_columns(state_.dual_z, clusters, layout);
        sub.dual_v = gather_columns(state_.dual_v, clusters, layout);
        for (Eigen::Index l : clusters)
            sub.sigma.push_back(state_.sigma[static_cast<std::size_t>(l)]);

        for (int k = 1; k <= params_.k_u_max; ++k) {
            const CMatrix previous = sub.x;
            const MMWeights mm = mm_weights_inner(sub.x, params_.eps0);
            const IterationWeights w =
                iteration_weights(inner_problem_, sub, mm.weights, params_, params_.inner_power_factor);
            admm_iteration(inner_problem_, *inner_gram_, sub, w, params_);
            check_finite(sub.x);
            ++out_.total_iterations;
            record(Stage::inner, inner_problem_, sub, mm.weights, w.mu, previous);
        }

        CMatrix x_full = CMatrix::Zero(state_.x.rows(), state_.x.cols());
        scatter_columns(sub.x, x_full, clusters, layout);
        state_.x = std::move(x_full);
        scatter_columns(sub.z, state_.z, clusters, layout);
        scatter_columns(sub.v, state_.v, clusters, layout);
        scatter_columns(sub.dual_z, state_.dual_z, clusters, layout);
        scatter_columns(sub.dual_v, state_.dual_v, clusters, layout);
        for (std::size_t k = 0; k < clusters.size(); ++k)
            state_.sigma[static_cast<std::size_t>(clusters[k])] = sub.sigma[k];
    }

    void check_finite(const CMatrix& x) const
    {
        if (!x.allFinite())
            throw SolverFault("non-finite iterate after " + std::to_string(out_.total_iterations + 1) +
                              " sweeps");
    }

    void record(Stage stage, const AdmmProblem& problem, const AdmmState& s, const RVector& mm,
                const RVector& mu, const CMatrix& previous)
    {
        if (!params_.record_diagnostics)
            return;
        IterationRecord rec;
        rec.iteration = out_.total_iterations;
        rec.stage = stage;
        const RVector mu_or_empty = params_.updates_covariance() ? mu : RVector();
        const MapObjectiveInput in{s.x, s.sigma, problem.received, problem.pilots,
                                   problem.prior_guess, mm, mu_or_empty, problem.layout};
        rec.objective = eval_map_objective(in, params_.betas).total();
        rec.residual_z = (s.x - s.z).norm();
        rec.residual_v = (s.x - s.v).norm();
        rec.change = (s.x - previous).norm();
        const RVector norms = column_norms(s.x);
        const double peak = norms.size() > 0 ? norms.maxCoeff() : 0.0;
        rec.detected = peak > 0.0 ? static_cast<Eigen::Index>(
                                        detect_support(s.x, params_.eps_detect_rel * peak).size())
                                  : 0;
        out_.diagnostics.push_back(rec);
    }

    AdmmProblem problem_;
    const SolverParams& params_;
    JuiceSolution& out_;
    GramSolver gram_;
    AdmmState state_;
    AdmmProblem inner_problem_;
    std::optional<GramSolver> inner_gram_;
    std::vector<Eigen::Index> inner_clusters_;
};

} // namespace

JuiceSolution solve(const CMatrix& received, const CMatrix& pilots, const ClusterLayout& layout,
                    const std::vector<CMatrix>& prior_guess, const RVector& powers,
                    const SolverParams& params)
{
    params.validate();
    if (pilots.rows() != received.rows())
        throw ConfigError("solve: pilot length differs between Y and Phi");
    if (pilots.cols() != layout.n_users() || powers.size() != layout.n_users())
        throw ConfigError("solve: user count differs between Phi, powers and layout");
    if (params.updates_covariance()) {
        if (static_cast<Eigen::Index>(prior_guess.size()) != layout.n_clusters())
            throw ConfigError("solve: one prior guess per cluster required");
        for (const CMatrix& b : prior_guess)
            if (b.rows() != received.cols() || b.cols() != received.cols())
                throw ConfigError("solve: prior guess must be M x M");
    }

    const auto start = std::chrono::steady_clock::now();
    JuiceSolution out;
    AdmmProblem problem{pilots, received, layout,
                        params.updates_covariance() ? prior_guess : std::vector<CMatrix>{}, powers};
    JuiceRunner(std::move(problem), params, out).run();
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace juice
