#include "aglab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "aglab/parallel.hpp"

namespace aglab {

void TrainConfig::validate() const
{
    if (iterations < 0) {
        throw std::invalid_argument("iterations must be >= 0");
    }
    if (batch_size <= 0) {
        throw std::invalid_argument("batch_size must be positive");
    }
    if (!(p_std > 0.0)) {
        throw std::invalid_argument("p_std must be positive");
    }
    if (!(alpha_ref > 0.0)) {
        throw std::invalid_argument("alpha_ref must be positive");
    }
    if (t_ref <= 0) {
        throw std::invalid_argument("t_ref must be positive");
    }
}

double sample_noise_level(const TrainConfig& config, Rng& rng)
{
    return std::exp(config.p_mean + config.p_std * standard_normal(rng));
}

double learning_rate(const TrainConfig& config, std::int64_t step)
{
    if (step < 1) {
        throw std::invalid_argument("learning rate schedule starts at t = 1");
    }
    const double ratio = static_cast<double>(step) / static_cast<double>(config.t_ref);
    return config.alpha_ref / std::sqrt(std::max(ratio, 1.0));
}

namespace {

struct TaskOracles {
    MixtureOracle class0, class1, marginal;

    explicit TaskOracles(const MixtureSpec& spec)
        : class0(spec, 0), class1(spec, 1), marginal(spec, std::nullopt)
    {
    }
    const MixtureOracle& of_class(int c) const { return c == 0 ? class0 : class1; }
};

// Noise levels and points are drawn sequentially from `rng`; the expensive
// target scores are filled in parallel afterwards.
TrainingBatch draw_batch(const ModelParams& model, const TaskOracles& oracles, const TrainConfig& config, Rng& rng)
{
    const auto n = static_cast<std::size_t>(config.batch_size);
    const bool conditional = model.arch.class_count > 0;
    TrainingBatch batch;
    batch.x.resize(2, static_cast<Eigen::Index>(n));
    batch.target.resize(2, static_cast<Eigen::Index>(n));
    batch.sigma.resize(n);
    batch.labels.resize(n);
    std::vector<int> source(n);
    for (std::size_t b = 0; b < n; ++b) {
        const int cls = static_cast<int>(b % kClassCount);
        const double sigma = sample_noise_level(config, rng);
        const auto col = static_cast<Eigen::Index>(b);
        source[b] = cls;
        batch.sigma[b] = sigma;
        batch.labels[b] = conditional ? ClassLabel(cls) : std::nullopt;
        if (config.loss_kind == LossKind::exact_sm) {
            batch.x.col(col) = oracles.of_class(cls).sample_one(sigma, rng);
        } else {
            const Vec2 y = oracles.of_class(cls).sample_one(0.0, rng);
            const Vec2 noise(sigma * standard_normal(rng), sigma * standard_normal(rng));
            batch.x.col(col) = y + noise;
            batch.target.col(col) = -noise / (sigma * sigma);
        }
    }
    if (config.loss_kind == LossKind::exact_sm) {
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t b = begin; b < end; ++b) {
                const auto col = static_cast<Eigen::Index>(b);
                const MixtureOracle& o = conditional ? oracles.of_class(source[b]) : oracles.marginal;
                batch.target.col(col) = o.score(batch.x.col(col), batch.sigma[b]).score;
            }
        });
    }
    return batch;
}

TrainingBatch slice(const TrainingBatch& b, std::size_t begin, std::size_t end)
{
    TrainingBatch s;
    const auto c0 = static_cast<Eigen::Index>(begin);
    const auto len = static_cast<Eigen::Index>(end - begin);
    s.x = b.x.middleCols(c0, len);
    s.target = b.target.middleCols(c0, len);
    s.sigma.assign(b.sigma.begin() + static_cast<std::ptrdiff_t>(begin), b.sigma.begin() + static_cast<std::ptrdiff_t>(end));
    s.labels.assign(b.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    b.labels.begin() + static_cast<std::ptrdiff_t>(end));
    return s;
}

// Mean gradient over the whole batch, reduced shard by shard in order.
GradientResult sharded_gradient(const ModelParams& params, const TrainingBatch& batch)
{
    const std::size_t n = batch.size();
    const std::size_t shards = (n + kGradientShard - 1) / kGradientShard;
    std::vector<GradientResult> parts(shards);
    parallel_for(shards, [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const std::size_t lo = s * kGradientShard;
            const std::size_t hi = std::min(n, lo + kGradientShard);
            parts[s] = grad_params(params, shards == 1 ? batch : slice(batch, lo, hi));
        }
    });
    if (shards == 1) {
        return std::move(parts[0]);
    }
    GradientResult total;
    total.gradient = params.zeros_like();
    for (std::size_t s = 0; s < shards; ++s) {
        const std::size_t lo = s * kGradientShard;
        const std::size_t hi = std::min(n, lo + kGradientShard);
        const double share = static_cast<double>(hi - lo) / static_cast<double>(n);
        total.loss += share * parts[s].loss;
        for (std::size_t l = 0; l < total.gradient.layers.size(); ++l) {
            total.gradient.layers[l] += share * parts[s].gradient.layers[l];
        }
        total.gradient.output_gain += share * parts[s].gradient.output_gain;
    }
    return total;
}

// Forced weight normalization: rows are kept at norm sqrt(fan_in), so each
// raw element has unit RMS and Adam steps are relative to that scale.
void normalize_weight_rows(ModelParams& p)
{
    for (auto& w : p.layers) {
        const double target = std::sqrt(static_cast<double>(w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            const double norm = w.row(r).norm();
            if (norm > 0.0) {
                w.row(r) *= target / norm;
            }
        }
    }
}

} // namespace

TrainingBatch draw_training_batch(const ModelParams& model, const MixtureSpec& spec, const TrainConfig& config,
                                  Rng& rng)
{
    config.validate();
    const TaskOracles oracles(spec);
    return draw_batch(model, oracles, config, rng);
}

Checkpoint TrainResult::to_checkpoint(const Rng& rng) const
{
    Checkpoint ckpt;
    ckpt.params = params;
    ckpt.step = static_cast<std::uint64_t>(steps);
    std::ostringstream state;
    state << rng;
    ckpt.rng_state = state.str();
    for (const auto& t : ema) {
        ckpt.ema.push_back({t.sigma_rel(), t.exponent(), t.averaged_params(params)});
    }
    return ckpt;
}

TrainResult train(ModelParams model, const MixtureSpec& spec, const TrainConfig& config, Rng& rng,
                  const TrainProgress& progress)
{
    config.validate();
    model.arch.validate();
    const TaskOracles oracles(spec);

    TrainResult result;
    for (double s : config.ema_sigma_rels) {
        result.ema.emplace_back(s, model);
    }

    std::vector<double> theta, grad, m, v;
    model.flatten(theta);
    m.assign(theta.size(), 0.0);
    v.assign(theta.size(), 0.0);

    for (std::int64_t t = 1; t <= config.iterations; ++t) {
        const TrainingBatch batch = draw_batch(model, oracles, config, rng);
        GradientResult g;
        try {
            g = sharded_gradient(model, batch);
        } catch (const NumericError& e) {
            result.params = model;
            result.steps = t - 1;
            throw TrainingAborted("training step " + std::to_string(t) + ": " + e.what(), std::move(result));
        }
        const double lr = learning_rate(config, t);
        g.gradient.flatten(grad);
        const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
        }
        model.unflatten(theta);
        normalize_weight_rows(model);
        model.flatten(theta);

        for (auto& tracker : result.ema) {
            tracker.update(model, t);
        }
        const LossRecord rec{t, g.loss, lr};
        result.curve.push_back(rec);
        if (progress) {
            progress(rec);
        }
    }
    result.params = std::move(model);
    result.steps = config.iterations;
    return result;
}

std::string loss_curve_csv(const std::vector<LossRecord>& curve)
{
    std::string out = "step,loss,lr\n";
    char line[128];
    for (const auto& r : curve) {
        std::snprintf(line, sizeof line, "%lld,%.17g,%.17g\n", static_cast<long long>(r.step), r.loss,
                      r.learning_rate);
        out += line;
    }
    return out;
}

} // namespace aglab
