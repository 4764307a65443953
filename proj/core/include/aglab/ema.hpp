#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aglab/netmodel.hpp"

namespace aglab {

/// Largest attainable relative std (the uniform profile, exponent 0).
inline constexpr double kMaxSigmaRel = 0.28867513459481287;
/// Training length over which the exponent-to-width mapping is simulated.
inline constexpr int kEmaReferenceSteps = 10000;

/// Relative standard deviation (std / steps) of the averaging profile that the
/// power-function update produces after `steps` updates with this exponent.
/// Computed by running the update recurrence on the first two moments of the
/// step index.
double simulated_profile_relative_std(double exponent, int steps = kEmaReferenceSteps);

/// Exponent whose simulated profile has the requested relative std, found by
/// bisection on simulated_profile_relative_std.
double ema_exponent_for_sigma_rel(double sigma_rel, int steps = kEmaReferenceSteps);

/// Per-step decay (1 - 1/t)^(exponent + 1) of the power-function average.
double power_function_beta(double exponent, std::int64_t step);

/// Power-function EMA over a flat parameter vector.
class EmaTracker {
public:
    EmaTracker() = default;
    EmaTracker(double sigma_rel, const ModelParams& initial);

    double sigma_rel() const { return sigma_rel_; }
    double exponent() const { return exponent_; }

    void update(const ModelParams& current, std::int64_t step);
    void update(std::span<const double> current, std::int64_t step);

    const std::vector<double>& averaged() const { return averaged_; }
    /// Averaged values unpacked into a copy of `shape`.
    ModelParams averaged_params(const ModelParams& shape) const;

    /// Tracker over raw vectors (used by the profile oracle in tests).
    static EmaTracker for_vector(double sigma_rel, std::span<const double> initial);

private:
    double sigma_rel_ = 0.0;
    double exponent_ = 0.0;
    std::vector<double> averaged_;
    std::vector<double> scratch_;
};

EmaTracker ema_update(EmaTracker tracker, const ModelParams& current, std::int64_t step);

} // namespace aglab
