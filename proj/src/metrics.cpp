#include "juice/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>

namespace juice {

void NmseAccumulator::merge(const NmseAccumulator& other)
{
    numerator += other.numerator;
    denominator += other.denominator;
    trials += other.trials;
}

double NmseAccumulator::value() const
{
    if (denominator == 0.0)
        return std::numeric_limits<double>::quiet_NaN();
    return numerator / denominator;
}

NmseAccumulator nmse_accumulate(const CMatrix& truth, const CMatrix& estimate, NmseAccumulator acc)
{
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
        throw ConfigError("nmse: shape mismatch");
    acc.numerator += (truth - estimate).squaredNorm();
    acc.denominator += truth.squaredNorm();
    ++acc.trials;
    return acc;
}

double srr(const UserSet& truth, const UserSet& detected, SrrDifference kind)
{
    UserSet s = truth;
    UserSet d = detected;
    std::sort(s.begin(), s.end());
    std::sort(d.begin(), d.end());
    if (s.empty() && d.empty())
        return 1.0;

    UserSet common;
    std::set_intersection(s.begin(), s.end(), d.begin(), d.end(), std::back_inserter(common));
    UserSet diff;
    if (kind == SrrDifference::symmetric)
        std::set_symmetric_difference(s.begin(), s.end(), d.begin(), d.end(), std::back_inserter(diff));
    else
        std::set_difference(s.begin(), s.end(), d.begin(), d.end(), std::back_inserter(diff));
    return static_cast<double>(common.size()) / static_cast<double>(diff.size() + s.size());
}

UserSet detect_support(const CMatrix& estimate, double threshold)
{
    if (threshold < 0.0)
        throw ConfigError("detect_support: negative threshold");
    UserSet out;
    for (Eigen::Index i = 0; i < estimate.cols(); ++i)
        if (estimate.col(i).norm() > threshold)
            out.push_back(i);
    return out;
}

double to_db(double ratio)
{
    return 10.0 * std::log10(ratio);
}

} // namespace juice
