#include "aglab/guidance.hpp"

#include <stdexcept>

namespace aglab {

std::string to_string(GuidanceMode mode)
{
    switch (mode) {
    case GuidanceMode::none:
        return "none";
    case GuidanceMode::cfg:
        return "cfg";
    case GuidanceMode::autoguidance:
        return "autoguidance";
    case GuidanceMode::naive_truncation:
        return "naive_truncation";
    case GuidanceMode::multi:
        return "multi";
    }
    return "unknown";
}

GuidanceMode guidance_mode_from_string(const std::string& name)
{
    for (GuidanceMode m : {GuidanceMode::none, GuidanceMode::cfg, GuidanceMode::autoguidance,
                           GuidanceMode::naive_truncation, GuidanceMode::multi}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw std::invalid_argument("unknown guidance mode: " + name);
}

void GuidanceSpec::validate() const
{
    if (!main) {
        throw std::invalid_argument("guidance requires a main denoiser");
    }
    std::size_t needed = 0;
    if (mode == GuidanceMode::cfg || mode == GuidanceMode::autoguidance) {
        needed = 1;
    } else if (mode == GuidanceMode::multi) {
        needed = 2;
        if (blend_alpha < 0.0 || blend_alpha > 1.0) {
            throw std::invalid_argument("blend_alpha must lie in [0, 1]");
        }
    }
    if (guides.size() < needed) {
        throw std::invalid_argument("guidance mode " + to_string(mode) + " needs " + std::to_string(needed) +
                                    " guide denoiser(s)");
    }
    for (std::size_t i = 0; i < needed; ++i) {
        if (!guides[i]) {
            throw std::invalid_argument("guide handle " + std::to_string(i) + " is missing");
        }
    }
    if (interval && !(interval->lo >= 0.0 && interval->lo < interval->hi)) {
        throw std::invalid_argument("guidance interval must satisfy 0 <= lo < hi");
    }
}

std::pair<double, double> GuidanceSpec::multi_weights() const
{
    return {(1.0 - blend_alpha) * (weight - 1.0) + 1.0, blend_alpha * (weight - 1.0) + 1.0};
}

namespace {

ClassLabel guide_label(GuidanceMode mode, std::size_t guide_index, ClassLabel label)
{
    if (mode == GuidanceMode::cfg || (mode == GuidanceMode::multi && guide_index == 0)) {
        return std::nullopt;
    }
    return label;
}

} // namespace

Points guided_denoise(const GuidanceSpec& spec, const Points& x, double sigma, ClassLabel label,
                      const EvalContext& ctx)
{
    spec.validate();
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("guided_denoise requires sigma > 0");
    }
    const Denoiser& main = *spec.main;
    if (spec.mode == GuidanceMode::none || !spec.active_at(sigma)) {
        return main.denoise(x, sigma, label, ctx);
    }
    switch (spec.mode) {
    case GuidanceMode::cfg:
    case GuidanceMode::autoguidance: {
        const Points dm = main.denoise(x, sigma, label, ctx);
        const Points dg = spec.guides[0]->denoise(x, sigma, guide_label(spec.mode, 0, label), ctx);
        return spec.weight * dm + (1.0 - spec.weight) * dg;
    }
    case GuidanceMode::naive_truncation:
        return x + sigma * sigma * (spec.truncation_factor * main.score(x, sigma, label, ctx));
    case GuidanceMode::multi: {
        const auto [wu, wc] = spec.multi_weights();
        const Points dm = main.denoise(x, sigma, label, ctx);
        const Points du = spec.guides[0]->denoise(x, sigma, guide_label(spec.mode, 0, label), ctx);
        const Points dc = spec.guides[1]->denoise(x, sigma, guide_label(spec.mode, 1, label), ctx);
        return dm + (wu - 1.0) * (dm - du) + (wc - 1.0) * (dm - dc);
    }
    case GuidanceMode::none:
        break;
    }
    return main.denoise(x, sigma, label, ctx);
}

Points guided_score(const GuidanceSpec& spec, const Points& x, double sigma, ClassLabel label,
                    const EvalContext& ctx)
{
    spec.validate();
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("guided_score requires sigma > 0");
    }
    const Denoiser& main = *spec.main;
    if (spec.mode == GuidanceMode::none || !spec.active_at(sigma)) {
        return main.score(x, sigma, label, ctx);
    }
    switch (spec.mode) {
    case GuidanceMode::cfg:
    case GuidanceMode::autoguidance: {
        const Points sm = main.score(x, sigma, label, ctx);
        const Points sg = spec.guides[0]->score(x, sigma, guide_label(spec.mode, 0, label), ctx);
        return sm + (spec.weight - 1.0) * (sm - sg);
    }
    case GuidanceMode::naive_truncation:
        return spec.truncation_factor * main.score(x, sigma, label, ctx);
    case GuidanceMode::multi: {
        const auto [wu, wc] = spec.multi_weights();
        const Points sm = main.score(x, sigma, label, ctx);
        const Points su = spec.guides[0]->score(x, sigma, guide_label(spec.mode, 0, label), ctx);
        const Points sc = spec.guides[1]->score(x, sigma, guide_label(spec.mode, 1, label), ctx);
        return sm + (wu - 1.0) * (sm - su) + (wc - 1.0) * (sm - sc);
    }
    case GuidanceMode::none:
        break;
    }
    return main.score(x, sigma, label, ctx);
}

GuidedDenoiser::GuidedDenoiser(GuidanceSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
}

Points GuidedDenoiser::denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx) const
{
    return guided_denoise(spec_, x, sigma, label, ctx);
}

Points GuidedDenoiser::score(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx) const
{
    return guided_score(spec_, x, sigma, label, ctx);
}

LogRatioField log_ratio_field(const Denoiser& main, ClassLabel main_label, const Denoiser& guide,
                              ClassLabel guide_label, const Points& points, double sigma, bool with_value)
{
    if (with_value && !(main.has_energy() && guide.has_energy())) {
        throw std::invalid_argument("scalar log-ratio field needs energy-head models");
    }
    LogRatioField f;
    f.points = points;
    f.gradient = main.score(points, sigma, main_label) - guide.score(points, sigma, guide_label);
    if (with_value) {
        f.value = main.energy(points, sigma, main_label) - guide.energy(points, sigma, guide_label);
    }
    return f;
}

} // namespace aglab
