#include "aglab/degrade.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "aglab/guidance.hpp"
#include "aglab/rng.hpp"

namespace aglab {

std::string to_string(CorruptionKind kind)
{
    switch (kind) {
    case CorruptionKind::none: return "none";
    case CorruptionKind::dropout: return "dropout";
    case CorruptionKind::input_noise: return "input_noise";
    }
    throw std::invalid_argument("bad corruption kind");
}

CorruptionKind corruption_kind_from_string(const std::string& name)
{
    if (name == "none") {
        return CorruptionKind::none;
    }
    if (name == "dropout") {
        return CorruptionKind::dropout;
    }
    if (name == "input_noise" || name == "input-noise") {
        return CorruptionKind::input_noise;
    }
    throw std::invalid_argument("unknown corruption kind: " + name);
}

void CorruptionSpec::validate() const
{
    if (kind == CorruptionKind::dropout && !(strength >= 0.0 && strength < 1.0)) {
        throw std::invalid_argument("dropout rate must be in [0, 1)");
    }
    if (kind == CorruptionKind::input_noise && !(strength >= 0.0)) {
        throw std::invalid_argument("input-noise fraction must be >= 0");
    }
}

DropoutDenoiser::DropoutDenoiser(std::shared_ptr<const ModelParams> params, double rate, std::uint64_t seed,
                                 bool frozen_mask)
    : params_(std::move(params)), rate_(rate), seed_(seed), frozen_(frozen_mask)
{
    if (!params_) {
        throw std::invalid_argument("null model parameters");
    }
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("dropout rate must be in [0, 1)");
    }
}

MaskFn DropoutDenoiser::mask_for(const EvalContext& ctx) const
{
    return [this, ctx](int layer, Eigen::MatrixXd& m) {
        const double keep_scale = 1.0 / (1.0 - rate_);
        for (Eigen::Index b = 0; b < m.cols(); ++b) {
            const std::uint64_t call = frozen_ ? 0 : ctx.call_key;
            const std::uint64_t sample = frozen_ ? 0 : ctx.id(b);
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                const double u = uniform01(stream_key(seed_, call, sample, layer, i));
                m(i, b) = u < rate_ ? 0.0 : keep_scale;
            }
        }
    };
}

Points DropoutDenoiser::score(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx) const
{
    if (rate_ == 0.0) {
        return model_score_batch(*params_, x, sigma, label);
    }
    const MaskFn mask = mask_for(ctx);
    return model_score_batch(*params_, x, sigma, label, &mask);
}

std::vector<Eigen::MatrixXd> DropoutDenoiser::activations(const Points& x, double sigma, ClassLabel label,
                                                          const EvalContext& ctx) const
{
    if (rate_ == 0.0) {
        return hidden_activations(*params_, x, sigma, label);
    }
    const MaskFn mask = mask_for(ctx);
    return hidden_activations(*params_, x, sigma, label, &mask);
}

InputNoiseDenoiser::InputNoiseDenoiser(DenoiserPtr base, double delta, std::uint64_t seed)
    : base_(std::move(base)), delta_(delta), seed_(seed)
{
    if (!base_) {
        throw std::invalid_argument("null base denoiser");
    }
    if (!(delta >= 0.0)) {
        throw std::invalid_argument("input-noise fraction must be >= 0");
    }
}

Points InputNoiseDenoiser::denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx) const
{
    if (delta_ == 0.0) {
        return base_->denoise(x, sigma, label, ctx);
    }
    const double raised = (1.0 + delta_) * sigma;
    const double extra = std::sqrt(raised * raised - sigma * sigma);
    Points noisy(2, x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const std::uint64_t id = ctx.id(j);
        noisy(0, j) = x(0, j) + extra * keyed_normal(stream_key(seed_, ctx.call_key, id, 0));
        noisy(1, j) = x(1, j) + extra * keyed_normal(stream_key(seed_, ctx.call_key, id, 1));
    }
    return base_->denoise(noisy, raised, label, ctx);
}

DenoiserPtr wrap_dropout(std::shared_ptr<const ModelParams> params, double rate, std::uint64_t seed, bool frozen_mask)
{
    return std::make_shared<const DropoutDenoiser>(std::move(params), rate, seed, frozen_mask);
}

DenoiserPtr wrap_input_noise(DenoiserPtr base, double delta, std::uint64_t seed)
{
    return std::make_shared<const InputNoiseDenoiser>(std::move(base), delta, seed);
}

DenoiserPtr corrupt(std::shared_ptr<const ModelParams> params, const CorruptionSpec& spec)
{
    spec.validate();
    switch (spec.kind) {
    case CorruptionKind::none: return std::make_shared<const ModelDenoiser>(std::move(params));
    case CorruptionKind::dropout: return wrap_dropout(std::move(params), spec.strength, spec.seed, spec.frozen_mask);
    case CorruptionKind::input_noise:
        return wrap_input_noise(std::make_shared<const ModelDenoiser>(std::move(params)), spec.strength, spec.seed);
    }
    throw std::invalid_argument("bad corruption kind");
}

DegradationResult degradation_experiment(std::shared_ptr<const ModelParams> base, const CorruptionSpec& main,
                                         const CorruptionSpec& guide, const std::vector<double>& w_grid,
                                         const MetricContext& context, const DegradationSettings& settings)
{
    bool has_unit = false;
    for (double w : w_grid) {
        has_unit = has_unit || w == 1.0;
    }
    if (!has_unit) {
        throw std::invalid_argument("degradation grid must contain w = 1");
    }
    DegradationResult result;
    result.main = main;
    result.guide = guide;

    GuidanceSpec gs;
    gs.mode = GuidanceMode::autoguidance;
    gs.main = corrupt(base, main);
    gs.guides = {corrupt(base, guide)};
    const ClassLabel label = context.label();
    for (double w : w_grid) {
        gs.weight = w;
        const GuidedDenoiser guided(gs);
        const Points pop = sample_population(guided, settings.schedule, label, settings.population, settings.sample_seed);
        result.rows.push_back({w, context.evaluate(pop)});
        if (w == 1.0) {
            result.baseline = result.rows.back().report.composite;
        }
    }
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        if (result.rows[i].report.composite < result.rows[result.best_index].report.composite) {
            result.best_index = i;
        }
    }
    return result;
}

std::string degradation_csv(const std::vector<DegradationResult>& results)
{
    std::string out = "kind_main,kind_guide,strength_main,strength_guide,w,metric\n";
    char line[256];
    for (const auto& r : results) {
        for (const auto& row : r.rows) {
            std::snprintf(line, sizeof line, "%s,%s,%.17g,%.17g,%.17g,%.17g\n", to_string(r.main.kind).c_str(),
                          to_string(r.guide.kind).c_str(), r.main.strength, r.guide.strength, row.weight,
                          row.report.composite);
            out += line;
        }
    }
    return out;
}

} // namespace aglab
