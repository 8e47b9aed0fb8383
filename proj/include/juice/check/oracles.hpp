#pragma once

// Numeric minimizers of the ADMM subproblems. They only evaluate the
// subproblem objectives and their gradients and never call the closed-form
// updates, so they can serve as reference values for them.

#include <vector>

#include "juice/model.hpp"
#include "juice/types.hpp"

namespace juice::check {

/// 1/2 ||Phi Z^T - Y||^2 + rho/2 ||X - Z + Lambda_z / rho||^2
double z_objective(const CMatrix& z, const CMatrix& x, const CMatrix& dual_z,
                   const CMatrix& received, const CMatrix& pilots, double rho);
/// Gradient 2 d/dZ^* of the Z objective.
CMatrix z_gradient(const CMatrix& z, const CMatrix& x, const CMatrix& dual_z,
                   const CMatrix& received, const CMatrix& pilots, double rho);
CMatrix minimize_z(const CMatrix& x, const CMatrix& dual_z, const CMatrix& received,
                   const CMatrix& pilots, double rho);

/// beta2 sum_i v_i^H Sigma_l v_i + rho/2 ||X - V + Lambda_v / rho||^2
double v_objective(const CMatrix& v, const CMatrix& x, const CMatrix& dual_v,
                   const std::vector<CMatrix>& sigma, double rho, double beta2,
                   const ClusterLayout& layout);
CMatrix v_gradient(const CMatrix& v, const CMatrix& x, const CMatrix& dual_v,
                   const std::vector<CMatrix>& sigma, double rho, double beta2,
                   const ClusterLayout& layout);
CMatrix minimize_v(const CMatrix& x, const CMatrix& dual_v, const std::vector<CMatrix>& sigma,
                   double rho, double beta2, const ClusterLayout& layout);

/// alpha ||x|| + rho ||x - c||^2 for a single column.
double x_objective(const CVector& x, const CVector& c, double alpha, double rho);
/// Golden-section search of the scalar objective along c.
CVector minimize_x_column(const CVector& c, double alpha, double rho);

/// beta2 tr(Sigma S) - mu log det Sigma + beta3 L tr(B^-1 Sigma), S = sum v v^H
double sigma_objective(const CMatrix& sigma, const CMatrix& scatter, const CMatrix& prior_guess,
                       double mu, double beta2, double beta3, double cluster_size);
/// Gradient beta2 S - mu Sigma^-1 + beta3 L B^-1.
CMatrix sigma_gradient(const CMatrix& sigma, const CMatrix& scatter, const CMatrix& prior_guess,
                       double mu, double beta2, double beta3, double cluster_size);
/// Natural-gradient descent on the HPD cone.
CMatrix minimize_sigma(const CMatrix& scatter, const CMatrix& prior_guess, double mu,
                       double beta2, double beta3, double cluster_size);

/// Random Hermitian positive definite matrix with eigenvalues >= floor.
CMatrix random_hpd(Eigen::Index m, double floor, std::uint64_t seed);

} // namespace juice::check
