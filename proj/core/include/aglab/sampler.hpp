#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aglab/denoiser.hpp"

namespace aglab {

/// Noise-level ladder sigma_0 = sigma_max > ... > sigma_{N-1} = sigma_min > sigma_N = 0.
struct SigmaSchedule {
    int n_steps = 32;
    double sigma_min = 0.002;
    double sigma_max = 5.0;
    double rho = 7.0;
    std::vector<double> ladder;

    /// Denoiser evaluations per trajectory: two per step except the final Euler step.
    int nfe() const { return 2 * n_steps - 1; }
};

SigmaSchedule build_schedule(int n_steps = 32, double sigma_min = 0.002, double sigma_max = 5.0, double rho = 7.0);

struct TrajectoryStep {
    double sigma;
    Vec2 x;
    Vec2 denoised;
    Vec2 derivative;
};

/// N+1 states: one per ladder entry, the last at sigma = 0.
struct TrajectoryRecord {
    std::uint64_t sample_id = 0;
    std::vector<TrajectoryStep> steps;
    Vec2 final_state() const { return steps.back().x; }
};

/// Heun integration of dx/dsigma = (x - D(x; sigma)) / sigma over a batch of
/// starting points. Columns are independent; `ids` keys each column's
/// randomness in stochastic denoisers (defaults to column index).
Points heun_sample_batch(const Denoiser& denoiser, const SigmaSchedule& schedule, ClassLabel label,
                         const Points& x_init, std::span<const std::uint64_t> ids = {},
                         std::vector<TrajectoryRecord>* records = nullptr);

Vec2 heun_sample(const Denoiser& denoiser, const SigmaSchedule& schedule, ClassLabel label, const Vec2& x_init,
                 TrajectoryRecord* record = nullptr);

/// Starting point of sample `id`: sigma_max * N(0, I) from a per-sample stream.
Vec2 initial_point(const SigmaSchedule& schedule, std::uint64_t seed, std::uint64_t id);

/// Points are processed in chunks of this many samples.
inline constexpr std::size_t kPopulationChunk = 1024;

/// Samples ids first_id .. first_id+count-1; output column k is sample first_id+k.
Points sample_population(const Denoiser& denoiser, const SigmaSchedule& schedule, ClassLabel label,
                         std::size_t count, std::uint64_t seed, std::uint64_t first_id = 0);

std::string population_csv(const Points& population, ClassLabel label, std::uint64_t first_id = 0);
Points population_from_csv(const std::string& text);
std::string trajectories_csv(const std::vector<TrajectoryRecord>& records);

} // namespace aglab
