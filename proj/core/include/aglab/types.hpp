#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace aglab {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
/// Column-per-point batch of 2D samples.
using Points = Eigen::Matrix2Xd;

/// Class label; std::nullopt selects the class-marginal (unconditional) task.
using ClassLabel = std::optional<int>;

inline constexpr int kClassCount = 2;
inline constexpr double kSigmaData = 0.5;

/// Raised when a computation produces non-finite values. Maps to CLI exit code 2.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File or stream failure. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace aglab
