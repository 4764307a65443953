#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aglab/denoiser.hpp"

namespace aglab {

enum class GuidanceMode { none, cfg, autoguidance, naive_truncation, multi };

std::string to_string(GuidanceMode mode);
GuidanceMode guidance_mode_from_string(const std::string& name);

/// Guidance is active for sigma in (lo, hi].
struct GuidanceInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double sigma) const { return sigma > lo && sigma <= hi; }
};

inline constexpr double kDefaultTruncationFactor = 1.40;

struct GuidanceSpec {
    GuidanceMode mode = GuidanceMode::none;
    double weight = 1.0;
    /// multi only: 0 is pure CFG, 1 is pure autoguidance.
    double blend_alpha = 0.5;
    double truncation_factor = kDefaultTruncationFactor;
    std::optional<GuidanceInterval> interval;

    DenoiserPtr main;
    /// cfg: {unconditional}; autoguidance: {inferior conditional};
    /// multi: {unconditional, inferior conditional}.
    std::vector<DenoiserPtr> guides;

    void validate() const;
    bool active_at(double sigma) const { return !interval || interval->contains(sigma); }
    /// Weights (w_u, w_c) of the two guides in multi mode.
    std::pair<double, double> multi_weights() const;
};

Points guided_denoise(const GuidanceSpec& spec, const Points& x, double sigma, ClassLabel label,
                      const EvalContext& ctx = {});
Points guided_score(const GuidanceSpec& spec, const Points& x, double sigma, ClassLabel label,
                    const EvalContext& ctx = {});

/// A GuidanceSpec packaged as a Denoiser, so samplers need not know about guidance.
class GuidedDenoiser final : public Denoiser {
public:
    explicit GuidedDenoiser(GuidanceSpec spec);

    Points denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override;
    Points score(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override;

    const GuidanceSpec& spec() const { return spec_; }

private:
    GuidanceSpec spec_;
};

/// log(p_main / p_guide) and its x-gradient over a set of points.
struct LogRatioField {
    Points points;
    std::optional<Eigen::RowVectorXd> value;
    Points gradient;
};

/// The scalar part requires both denoisers to expose energies; pass
/// `with_value = false` to get only the gradient field.
LogRatioField log_ratio_field(const Denoiser& main, ClassLabel main_label, const Denoiser& guide,
                              ClassLabel guide_label, const Points& points, double sigma, bool with_value = true);

} // namespace aglab
