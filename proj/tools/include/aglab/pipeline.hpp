#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "aglab/checkpoint.hpp"
#include "aglab/guidance.hpp"
#include "aglab/metrics.hpp"
#include "aglab/mixture.hpp"
#include "aglab/sampler.hpp"
#include "aglab/trainer.hpp"

namespace aglab::pipeline {

using Log = std::function<void(const std::string&)>;

struct ModelRecipe {
    ArchDescriptor arch;
    TrainConfig train;
};

/// Defaults follow the toy setup: main model width 64 for 4096 iterations;
/// guides at width 32 for 1/8 of the iterations.
struct ModelPlan {
    std::uint64_t seed = 0;
    int batch_size = 4096;
    int main_width = 64;
    int main_iterations = 4096;
    int guide_width = 32;
    int guide_iterations = 512;
    LossKind loss = LossKind::exact_sm;
};

ModelRecipe main_recipe(const ModelPlan& plan);
ModelRecipe guide_recipe(const ModelPlan& plan);
/// Unconditional guide for classifier-free guidance.
ModelRecipe uncond_recipe(const ModelPlan& plan);

Checkpoint train_recipe(const ModelRecipe& recipe, const MixtureSpec& spec, const Log& log = {},
                        std::vector<LossRecord>* curve = nullptr);

/// EMA snapshot with the given length, or the raw weights when sigma_rel <= 0.
std::shared_ptr<const ModelParams> pick(const Checkpoint& ckpt, double sigma_rel);

enum Condition { ground_truth = 0, unguided, cfg, truncation, autoguidance };
inline constexpr std::array<const char*, 5> kConditionNames = {"ground_truth", "unguided", "cfg", "truncation",
                                                               "autoguidance"};

struct ConditionSettings {
    int label = 0;
    std::size_t count = 10'000;
    std::uint64_t seed = 0;
    double cfg_weight = 4.0;
    double auto_weight = 3.0;
    double truncation_factor = kDefaultTruncationFactor;
    SigmaSchedule schedule = build_schedule();
};

struct ConditionModels {
    DenoiserPtr main, guide, uncond;
};

/// Populations for the five toy-figure conditions, in Condition order.
std::array<Points, 5> sample_conditions(const MixtureSpec& spec, const ConditionModels& models,
                                        const ConditionSettings& settings, const Log& log = {});

/// Mixture and outlier thresholds for both classes.
struct DataBundle {
    MixtureSpec spec;
    std::array<double, kClassCount> thresholds{};
};

DataBundle make_data(std::uint64_t seed, std::size_t calibration_samples = kThresholdSamples);
void save_data(const DataBundle& data, const std::filesystem::path& dir);
/// Reads mixture.json and thresholds.json from `dir`.
DataBundle load_data(const std::filesystem::path& dir);
std::string thresholds_json(const DataBundle& data);

struct ReproSettings {
    std::uint64_t data_seed = 0;
    ModelPlan plan;
    ConditionSettings conditions;
    double ema_sigma_rel = 0.010;
    double guide_ema_sigma_rel = 0.010;
    std::size_t calibration_samples = kThresholdSamples;
    int image_size = 512;
    double fig2_sigma_mid = 0.03;
    double fig2_weight = 4.0;
    bool render = true;
};

struct ReproResult {
    std::array<MetricReport, 5> reports;
};

/// Trains the three models, samples and scores the five conditions, and
/// renders the figure presets under `out`.
ReproResult run_repro(const ReproSettings& settings, const std::filesystem::path& out, const Log& log = {});

std::string reports_json(const std::array<MetricReport, 5>& reports);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

} // namespace aglab::pipeline
