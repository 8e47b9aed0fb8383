#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace juice {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Index of a user (column of the effective channel matrix), zero based.
using UserIndex = Eigen::Index;
using UserSet = std::vector<UserIndex>;

/// Invalid or inconsistent configuration (dimensions, counts, parameters).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown inside an iterative solver (non-finite iterate,
/// loss of positive definiteness).
class SolverFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix argument outside the domain of a function (e.g. not HPD).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

} // namespace juice
