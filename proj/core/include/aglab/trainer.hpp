#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aglab/checkpoint.hpp"
#include "aglab/ema.hpp"
#include "aglab/mixture.hpp"
#include "aglab/netmodel.hpp"
#include "aglab/rng.hpp"

namespace aglab {

struct TrainConfig {
    int iterations = 4096;
    int batch_size = 4096;
    double p_mean = -2.3;
    double p_std = 1.5;
    double alpha_ref = 0.01;
    int t_ref = 512;
    LossKind loss_kind = LossKind::exact_sm;
    std::vector<double> ema_sigma_rels = {0.005, 0.010, 0.025, 0.050};
    std::uint64_t seed = 0;

    // Adam moments.
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-8;

    void validate() const;
};

/// Gradients are computed over fixed-size shards and reduced in shard order,
/// so results do not depend on the thread cap.
inline constexpr int kGradientShard = 512;

struct LossRecord {
    std::int64_t step;
    double loss;
    double learning_rate;
};

struct TrainResult {
    ModelParams params;
    std::vector<EmaTracker> ema;
    std::vector<LossRecord> curve;
    std::int64_t steps = 0;

    Checkpoint to_checkpoint(const Rng& rng) const;
};

/// Thrown when the loss turns non-finite; carries the last finite state.
class TrainingAborted : public NumericError {
public:
    TrainingAborted(const std::string& what, TrainResult partial)
        : NumericError(what), partial_(std::move(partial))
    {
    }
    const TrainResult& partial() const { return partial_; }

private:
    TrainResult partial_;
};

/// sigma = exp(p_mean + p_std * z), z ~ N(0, 1).
double sample_noise_level(const TrainConfig& config, Rng& rng);

/// alpha_ref / sqrt(max(t / t_ref, 1)).
double learning_rate(const TrainConfig& config, std::int64_t step);

/// Draws one score-matching minibatch. Classes alternate within the batch;
/// unconditional models see the same balanced draw with labels dropped and
/// marginal targets.
TrainingBatch draw_training_batch(const ModelParams& model, const MixtureSpec& spec, const TrainConfig& config,
                                  Rng& rng);

using TrainProgress = std::function<void(const LossRecord&)>;

TrainResult train(ModelParams model, const MixtureSpec& spec, const TrainConfig& config, Rng& rng,
                  const TrainProgress& progress = {});

std::string loss_curve_csv(const std::vector<LossRecord>& curve);

} // namespace aglab
