#pragma once

#include <vector>

#include "juice/model.hpp"
#include "juice/solver.hpp"
#include "juice/types.hpp"

namespace juice {

/// Genie knowledge for the oracle MMSE estimator.
struct OracleInfo {
    UserSet support;
    std::vector<CMatrix> covariances;  // p_i Sigma_l^-1, one per user in `support`
    double noise_var = 0.0;
};

OracleInfo make_oracle_info(const ProblemInstance& instance);

/// Linear MMSE estimate of the active columns given the true support and
/// covariances; all other columns are zero. Uses a per-antenna solve when
/// every covariance is a multiple of the identity.
CMatrix oracle_mmse(const CMatrix& received, const CMatrix& pilots, const OracleInfo& oracle);

/// Same estimator, always through the dense stacked system.
CMatrix oracle_mmse_dense(const CMatrix& received, const CMatrix& pilots, const OracleInfo& oracle);

/// The solver configuration that reduces the two-level algorithm to
/// iteratively reweighted l2,1 minimization.
SolverParams ir_l21_params(SolverParams params);

JuiceSolution ir_l21_admm(const CMatrix& received, const CMatrix& pilots, const SolverParams& params);

} // namespace juice
