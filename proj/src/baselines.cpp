#include "juice/baselines.hpp"

#include <cmath>

namespace juice {

namespace {

bool scaled_identity(const CMatrix& c, double& scale)
{
    scale = c(0, 0).real();
    CMatrix diff = c;
    diff.diagonal().array() -= scale;
    return diff.norm() <= 1e-12 * std::abs(scale) * static_cast<double>(c.rows());
}

CMatrix select_columns(const CMatrix& m, const UserSet& cols)
{
    CMatrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
        out.col(static_cast<Eigen::Index>(k)) = m.col(cols[k]);
    return out;
}

void check_oracle(const CMatrix& received, const CMatrix& pilots, const OracleInfo& oracle)
{
    if (received.rows() != pilots.rows())
        throw ConfigError("oracle MMSE: pilot length mismatch");
    if (oracle.covariances.size() != oracle.support.size())
        throw ConfigError("oracle MMSE: one covariance per active user required");
    if (oracle.noise_var < 0.0)
        throw ConfigError("oracle MMSE: negative noise variance");
    for (UserIndex i : oracle.support)
        if (i < 0 || i >= pilots.cols())
            throw ConfigError("oracle MMSE: support index out of range");
}

} // namespace

OracleInfo make_oracle_info(const ProblemInstance& instance)
{
    OracleInfo info;
    info.support = instance.activity.active;
    info.noise_var = instance.noise_var;
    for (UserIndex i : info.support)
        info.covariances.push_back(instance.stats.powers(i) *
                                   instance.stats.covariances[static_cast<std::size_t>(instance.layout.cluster_of(i))]);
    return info;
}

CMatrix oracle_mmse_dense(const CMatrix& received, const CMatrix& pilots, const OracleInfo& oracle)
{
    check_oracle(received, pilots, oracle);
    const Eigen::Index m = received.cols();
    const Eigen::Index tau = received.rows();
    const auto k = static_cast<Eigen::Index>(oracle.support.size());
    CMatrix estimate = CMatrix::Zero(m, pilots.cols());
    if (k == 0)
        return estimate;

    const CMatrix phi = select_columns(pilots, oracle.support);
    // Stacked unknown: block k holds x_{S_k} (length M).
    CMatrix block_est(m, k);
    if (k <= tau) {
        // (A^H A + sigma^2 C^-1) xi = A^H y, with A^H A = G (x) I_M.
        const CMatrix gram = phi.adjoint() * phi;
        CMatrix info = CMatrix::Zero(m * k, m * k);
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < k; ++b)
                info.block(a * m, b * m, m, m).diagonal().setConstant(gram(a, b));
        if (oracle.noise_var > 0.0) {
            for (Eigen::Index a = 0; a < k; ++a) {
                Eigen::LLT<CMatrix> c(oracle.covariances[static_cast<std::size_t>(a)]);
                if (c.info() != Eigen::Success)
                    throw DomainError("oracle MMSE: covariance is not positive definite");
                info.block(a * m, a * m, m, m) +=
                    oracle.noise_var * c.solve(CMatrix::Identity(m, m));
            }
        }
        const CMatrix matched = (phi.adjoint() * received).transpose();  // M x K
        const CVector rhs = Eigen::Map<const CVector>(matched.data(), m * k);
        const CVector xi = hermitian_part(info).ldlt().solve(rhs);
        block_est = Eigen::Map<const CMatrix>(xi.data(), m, k);
    } else {
        // C A^H (A C A^H + sigma^2 I)^-1 y, rows of the system indexed by m*tau + t.
        CMatrix sys = CMatrix::Zero(m * tau, m * tau);
        for (Eigen::Index a = 0; a < k; ++a) {
            const CMatrix& c = oracle.covariances[static_cast<std::size_t>(a)];
            const CMatrix outer = phi.col(a) * phi.col(a).adjoint();
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index j = 0; j < m; ++j)
                    sys.block(i * tau, j * tau, tau, tau) += c(i, j) * outer;
        }
        sys.diagonal().array() += oracle.noise_var;
        const CVector y = Eigen::Map<const CVector>(received.data(), tau * m);
        const CVector z = hermitian_part(sys).ldlt().solve(y);
        const CMatrix zmat = Eigen::Map<const CMatrix>(z.data(), tau, m);
        const CMatrix back = (phi.adjoint() * zmat).transpose();  // M x K
        for (Eigen::Index a = 0; a < k; ++a)
            block_est.col(a) = oracle.covariances[static_cast<std::size_t>(a)] * back.col(a);
    }
    for (Eigen::Index a = 0; a < k; ++a)
        estimate.col(oracle.support[static_cast<std::size_t>(a)]) = block_est.col(a);
    return estimate;
}

CMatrix oracle_mmse(const CMatrix& received, const CMatrix& pilots, const OracleInfo& oracle)
{
    check_oracle(received, pilots, oracle);
    const auto k = static_cast<Eigen::Index>(oracle.support.size());
    RVector scales(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        double s = 0.0;
        if (!scaled_identity(oracle.covariances[static_cast<std::size_t>(a)], s))
            return oracle_mmse_dense(received, pilots, oracle);
        scales(a) = s;
    }
    CMatrix estimate = CMatrix::Zero(received.cols(), pilots.cols());
    if (k == 0)
        return estimate;

    // Antennas decouple: u_m = (Phi^H Phi + sigma^2 D^-1)^-1 Phi^H y_m.
    const CMatrix phi = select_columns(pilots, oracle.support);
    CMatrix system = phi.adjoint() * phi;
    system.diagonal() += (oracle.noise_var * scales.cwiseInverse()).cast<cplx>();
    const CMatrix rows = hermitian_part(system).ldlt().solve(phi.adjoint() * received);  // K x M
    for (Eigen::Index a = 0; a < k; ++a)
        estimate.col(oracle.support[static_cast<std::size_t>(a)]) = rows.row(a).transpose();
    return estimate;
}

SolverParams ir_l21_params(SolverParams params)
{
    params.betas.beta2 = 0.0;
    params.betas.beta3 = 0.0;
    params.reweighting = Reweighting::user_only;
    return params;
}

JuiceSolution ir_l21_admm(const CMatrix& received, const CMatrix& pilots, const SolverParams& params)
{
    const Eigen::Index n = pilots.cols();
    return solve(received, pilots, ClusterLayout(n, n), {}, RVector::Ones(n), ir_l21_params(params));
}

} // namespace juice
