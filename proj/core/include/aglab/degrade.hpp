#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aglab/denoiser.hpp"
#include "aglab/metrics.hpp"
#include "aglab/sampler.hpp"

namespace aglab {

enum class CorruptionKind { none, dropout, input_noise };

std::string to_string(CorruptionKind kind);
CorruptionKind corruption_kind_from_string(const std::string& name);

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::none;
    /// Dropout rate in [0, 1), or relative noise-level increase >= 0.
    double strength = 0.0;
    std::uint64_t seed = 0;
    /// Dropout only: one mask shared by every evaluation instead of a fresh
    /// mask per (call, sample).
    bool frozen_mask = false;

    void validate() const;
};

/// Zeroes each hidden activation with probability `rate` and rescales the
/// survivors by 1 / (1 - rate). Masks are keyed by (seed, call, sample,
/// layer, unit), so results do not depend on batching or thread count.
class DropoutDenoiser final : public Denoiser {
public:
    DropoutDenoiser(std::shared_ptr<const ModelParams> params, double rate, std::uint64_t seed,
                    bool frozen_mask = false);

    Points score(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override;
    /// Hidden activations under the mask this denoiser would apply for `ctx`.
    std::vector<Eigen::MatrixXd> activations(const Points& x, double sigma, ClassLabel label,
                                             const EvalContext& ctx = {}) const;

    double rate() const { return rate_; }

private:
    MaskFn mask_for(const EvalContext& ctx) const;

    std::shared_ptr<const ModelParams> params_;
    double rate_;
    std::uint64_t seed_;
    bool frozen_;
};

/// Queries the base at sigma' = (1 + delta) sigma after adding
/// N(0, (sigma'^2 - sigma^2) I) to the input; the returned denoised point is
/// used as is.
class InputNoiseDenoiser final : public Denoiser {
public:
    InputNoiseDenoiser(DenoiserPtr base, double delta, std::uint64_t seed);

    Points denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override;

    double delta() const { return delta_; }

private:
    DenoiserPtr base_;
    double delta_;
    std::uint64_t seed_;
};

DenoiserPtr wrap_dropout(std::shared_ptr<const ModelParams> params, double rate, std::uint64_t seed,
                         bool frozen_mask = false);
DenoiserPtr wrap_input_noise(DenoiserPtr base, double delta, std::uint64_t seed);
/// Applies `spec` to a network; kind none (or zero strength) returns the plain model.
DenoiserPtr corrupt(std::shared_ptr<const ModelParams> params, const CorruptionSpec& spec);

struct DegradationRow {
    double weight;
    MetricReport report;
};

struct DegradationResult {
    CorruptionSpec main, guide;
    std::vector<DegradationRow> rows;
    std::size_t best_index = 0;
    /// Composite at w = 1 (the corrupted main model alone).
    double baseline = 0.0;

    double best_weight() const { return rows.at(best_index).weight; }
    double best_metric() const { return rows.at(best_index).report.composite; }
};

struct DegradationSettings {
    SigmaSchedule schedule = build_schedule();
    std::size_t population = 10'000;
    std::uint64_t sample_seed = 0;
};

/// Autoguidance of corrupt_main(base) by corrupt_guide(base) for each w,
/// scored by the composite metric on `context`'s class. The grid must
/// contain w = 1.
DegradationResult degradation_experiment(std::shared_ptr<const ModelParams> base, const CorruptionSpec& main,
                                         const CorruptionSpec& guide, const std::vector<double>& w_grid,
                                         const MetricContext& context, const DegradationSettings& settings = {});

/// kind_main,kind_guide,strength_main,strength_guide,w,metric
std::string degradation_csv(const std::vector<DegradationResult>& results);

} // namespace aglab
