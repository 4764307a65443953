#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace aglab::testing {

/// |a - b| / max(|b|, floor); the floor keeps near-zero references meaningful.
inline double rel_err(double a, double b, double floor = 1e-12)
{
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

template <typename A, typename B>
double rel_err_vec(const A& a, const B& b, double floor = 1e-12)
{
    return (a - b).norm() / std::max(b.norm(), floor);
}

} // namespace aglab::testing
