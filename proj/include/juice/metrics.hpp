#pragma once

#include "juice/types.hpp"

namespace juice {

/// Running ratio-of-sums NMSE: sum ||X - X_hat||^2 / sum ||X||^2.
struct NmseAccumulator {
    double numerator = 0.0;
    double denominator = 0.0;
    long trials = 0;

    void merge(const NmseAccumulator& other);
    /// NaN while the denominator is zero.
    double value() const;
};

NmseAccumulator nmse_accumulate(const CMatrix& truth, const CMatrix& estimate,
                                NmseAccumulator acc = {});

enum class SrrDifference { symmetric, one_sided };

/// |S n S_hat| / (|S - S_hat| + K). The set difference is symmetric by
/// default so that false alarms lower the score. Returns 1 when both sets
/// are empty.
double srr(const UserSet& truth, const UserSet& detected,
           SrrDifference kind = SrrDifference::symmetric);

/// {i : ||x_i|| > threshold}
UserSet detect_support(const CMatrix& estimate, double threshold);

double to_db(double ratio);

} // namespace juice
