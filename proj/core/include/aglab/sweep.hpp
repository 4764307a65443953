#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace aglab {

struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

/// Guidance weights 1.0, 1.05, ..., 3.5.
SweepAxis guidance_weight_axis();
/// EMA lengths available in checkpoints.
SweepAxis ema_axis(const std::string& name = "sigma_rel");

using SweepTuple = std::vector<int>;

/// objective(values, seed): smaller is better. `seed` is derived from the
/// tuple and repeat index only, so evaluation order never matters.
using SweepObjective = std::function<double(const std::vector<double>& values, std::uint64_t seed)>;

enum class SweepPhase { search, refine, done };

std::string to_string(SweepPhase phase);

struct SweepEntry {
    std::vector<double> repeats;
    double best() const;
};

/// Local grid search: evaluate the neighborhood (+-radius steps per axis,
/// diagonals included) of the incumbent, move to any strict improvement,
/// and once nothing improves re-evaluate the neighborhood until every tuple
/// in it has k_repeats results. A refined winner other than the incumbent
/// restarts the search around it.
struct SweepState {
    std::vector<SweepAxis> axes;
    std::map<SweepTuple, SweepEntry> evaluated;
    SweepTuple incumbent;
    int radius = 1;
    int k_repeats = 3;
    /// Maximum objective calls over the life of the state, resumes included.
    std::int64_t budget = 0;
    std::int64_t used = 0;
    std::uint64_t seed = 0;
    SweepPhase phase = SweepPhase::search;

    std::vector<double> values(const SweepTuple& t) const;
    /// Minimum best-of-repeats value over every evaluated tuple.
    SweepTuple best_tuple() const;
    double best_value() const;
    bool exhausted() const { return used >= budget; }
};

SweepState make_sweep(std::vector<SweepAxis> axes, std::int64_t budget, std::uint64_t seed,
                      SweepTuple start = {}, int k_repeats = 3, int radius = 1);

/// Runs until done or out of budget. Pending evaluations of one round may run
/// in parallel; results are merged in tuple order.
void run_sweep(SweepState& state, const SweepObjective& objective);

std::string sweep_state_json(const SweepState& state);
SweepState sweep_state_from_json(const std::string& text);

} // namespace aglab
