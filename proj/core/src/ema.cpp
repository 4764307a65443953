#include "aglab/ema.hpp"

#include <cmath>
#include <stdexcept>

namespace aglab {

double power_function_beta(double exponent, std::int64_t step)
{
    if (step < 1) {
        throw std::invalid_argument("EMA step must be >= 1");
    }
    return std::pow(1.0 - 1.0 / static_cast<double>(step), exponent + 1.0);
}

double simulated_profile_relative_std(double exponent, int steps)
{
    if (steps < 1) {
        throw std::invalid_argument("profile simulation needs at least one step");
    }
    double m1 = 0.0, m2 = 0.0;
    for (int t = 1; t <= steps; ++t) {
        const double beta = power_function_beta(exponent, t);
        const double tt = static_cast<double>(t);
        m1 += (1.0 - beta) * (tt - m1);
        m2 += (1.0 - beta) * (tt * tt - m2);
    }
    return std::sqrt(std::max(m2 - m1 * m1, 0.0)) / static_cast<double>(steps);
}

double ema_exponent_for_sigma_rel(double sigma_rel, int steps)
{
    if (!(sigma_rel > 0.0) || sigma_rel >= kMaxSigmaRel) {
        throw std::invalid_argument("sigma_rel must lie in (0, 0.2887)");
    }
    // Relative std decreases monotonically in the exponent.
    double lo = 0.0, hi = 1.0;
    while (simulated_profile_relative_std(hi, steps) > sigma_rel) {
        hi *= 2.0;
        if (hi > 1e7) {
            throw std::invalid_argument("sigma_rel too small for the reference step count");
        }
    }
    for (int it = 0; it < 80 && hi - lo > 1e-10 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (simulated_profile_relative_std(mid, steps) > sigma_rel) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

EmaTracker::EmaTracker(double sigma_rel, const ModelParams& initial)
    : sigma_rel_(sigma_rel), exponent_(ema_exponent_for_sigma_rel(sigma_rel))
{
    initial.flatten(averaged_);
}

EmaTracker EmaTracker::for_vector(double sigma_rel, std::span<const double> initial)
{
    EmaTracker t;
    t.sigma_rel_ = sigma_rel;
    t.exponent_ = ema_exponent_for_sigma_rel(sigma_rel);
    t.averaged_.assign(initial.begin(), initial.end());
    return t;
}

void EmaTracker::update(const ModelParams& current, std::int64_t step)
{
    current.flatten(scratch_);
    update(std::span<const double>(scratch_), step);
}

void EmaTracker::update(std::span<const double> current, std::int64_t step)
{
    if (current.size() != averaged_.size()) {
        averaged_.assign(current.size(), 0.0);
    }
    const double beta = power_function_beta(exponent_, step);
    if (beta == 0.0) {
        averaged_.assign(current.begin(), current.end());
        return;
    }
    for (std::size_t i = 0; i < averaged_.size(); ++i) {
        averaged_[i] += (1.0 - beta) * (current[i] - averaged_[i]);
    }
}

ModelParams EmaTracker::averaged_params(const ModelParams& shape) const
{
    ModelParams p = shape;
    p.unflatten(averaged_);
    return p;
}

EmaTracker ema_update(EmaTracker tracker, const ModelParams& current, std::int64_t step)
{
    tracker.update(current, step);
    return tracker;
}

} // namespace aglab
