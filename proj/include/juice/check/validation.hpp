#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace juice::check {

/// Outcome of one randomized invariant check.
struct CheckReport {
    std::string name;
    bool passed = false;
    int cases = 0;
    double worst = 0.0;      // worst observed error statistic
    double tolerance = 0.0;
    double seconds = 0.0;
    std::string detail;
};

/// Each closed-form update (Z, V, X, Sigma) against a numeric minimizer of
/// its subproblem on random small instances (M <= 4, N <= 6, tau_p <= 4).
/// Produces one report per update plus the Sigma stationarity residual.
std::vector<CheckReport> check_update_oracles(int instances, std::uint64_t seed,
                                              double tolerance = 1e-6,
                                              double sigma_gradient_tolerance = 1e-8);

/// Tangent majorizers of both log-sum priors on random (expansion, probe) pairs.
CheckReport check_mm_surrogate(int pairs, std::uint64_t seed, double tolerance = 1e-10);

/// Augmented Lagrangian with frozen MM weights is non-increasing across each
/// primal sweep Z -> V -> X -> Sigma.
CheckReport check_lagrangian_monotonicity(int runs, std::uint64_t seed, double tolerance = 1e-8,
                                          int sweeps_per_run = 25);

/// The quick suite behind `juice_sim validate`.
std::vector<CheckReport> run_validation_suite(std::uint64_t seed, int scale = 1);

std::string format_report(const CheckReport& report);

} // namespace juice::check
