#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aglab/types.hpp"

namespace aglab {

enum class HeadKind { energy, direct_score };

std::string to_string(HeadKind head);
HeadKind head_from_string(const std::string& name);

struct ArchDescriptor {
    int hidden_width = 64;
    int hidden_layers = 4;
    HeadKind head = HeadKind::energy;
    /// 2 for class-conditional models (one-hot appended to the input), 0 for unconditional.
    int class_count = kClassCount;

    int input_dim() const { return 4 + class_count; }
    int layer_count() const { return hidden_layers + 1; }
    int output_dim() const { return head == HeadKind::energy ? hidden_width : 2; }
    void validate() const;

    bool operator==(const ArchDescriptor&) const = default;
};

/// All learnable state of one denoiser. Raw weight rows are normalized to
/// unit L2 norm every time a layer is applied, so only row directions matter.
struct ModelParams {
    ArchDescriptor arch;
    std::vector<Eigen::MatrixXd> layers; // out x in, input layer first
    double output_gain = 0.0;
    double sigma_data = kSigmaData;

    std::size_t parameter_count() const;
    /// Same-shaped container filled with zeros (used for gradients and moments).
    ModelParams zeros_like() const;
    void flatten(std::vector<double>& out) const;
    void unflatten(std::span<const double> values);
};

/// Magnitude-preserving SiLU: silu(u) / 0.596 keeps unit-variance inputs near unit variance.
inline constexpr double kMpSiluScale = 0.596;

/// Fills a (width x batch) multiplier matrix for hidden activation `layer`.
/// Used for post-hoc dropout; absent means all ones.
using MaskFn = std::function<void(int layer, Eigen::MatrixXd& multipliers)>;

ModelParams init_model(const ArchDescriptor& arch, std::uint64_t seed);

/// Batched query. Each column of `x` carries its own noise level and label.
struct ModelQuery {
    const Points& x;
    std::span<const double> sigma;
    std::span<const ClassLabel> labels;
};

struct ModelOutputs {
    Eigen::RowVectorXd energy; // filled only for energy heads when requested
    Points score;
};

void evaluate_model(const ModelParams& params, const ModelQuery& query, ModelOutputs& out, bool want_energy = false,
                    const MaskFn* mask = nullptr);

/// Same noise level and label for every column.
Points model_score_batch(const ModelParams& params, const Points& x, double sigma, ClassLabel label,
                         const MaskFn* mask = nullptr);
Eigen::RowVectorXd model_energy_batch(const ModelParams& params, const Points& x, double sigma, ClassLabel label);

double energy(const ModelParams& params, const Vec2& x, double sigma, ClassLabel label);
Vec2 score_of_model(const ModelParams& params, const Vec2& x, double sigma, ClassLabel label);
Vec2 denoise(const ModelParams& params, const Vec2& x, double sigma, ClassLabel label);

/// Post-activation hidden features (one matrix per hidden activation) for
/// inspecting the dropout contract.
std::vector<Eigen::MatrixXd> hidden_activations(const ModelParams& params, const Points& x, double sigma,
                                                ClassLabel label, const MaskFn* mask = nullptr);

enum class LossKind { exact_sm, denoising_sm };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// One minibatch for score-matching. Per-sample loss is weight * ||score - target||^2;
/// an empty `weight` means sigma^2.
struct TrainingBatch {
    Points x;
    std::vector<double> sigma;
    std::vector<ClassLabel> labels;
    Points target;
    std::vector<double> weight;

    std::size_t size() const { return sigma.size(); }
};

struct GradientResult {
    ModelParams gradient; // same shape as the parameters
    double loss = 0.0;    // batch mean
};

/// Gradient of the mean weighted squared score error. For energy heads this
/// differentiates through the input-tangent pass (a gradient of a gradient).
GradientResult grad_params(const ModelParams& params, const TrainingBatch& batch);

} // namespace aglab
