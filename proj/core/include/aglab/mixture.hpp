#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aglab/rng.hpp"
#include "aglab/types.hpp"

namespace aglab {

struct MixtureComponent {
    double weight = 0.0;
    Vec2 mean = Vec2::Zero();
    Mat2 covariance = Mat2::Identity();
};

/// Affine map applied after construction: x_normalized = (x_raw - shift) * scale (per axis).
struct Normalization {
    Vec2 shift = Vec2::Zero();
    Vec2 scale = Vec2::Ones();
};

/// Two-class Gaussian mixture. Class priors are equal; within a class the
/// component weights sum to one.
struct MixtureSpec {
    std::array<std::vector<MixtureComponent>, kClassCount> classes;
    std::uint64_t seed = 0;
    Normalization normalization;

    std::size_t component_count() const { return classes[0].size() + classes[1].size(); }

    /// Components of one class, or of the class-marginal with weights halved.
    std::vector<MixtureComponent> components(ClassLabel label) const;
};

/// Geometry constants of the procedural fractal trees (pre-normalization units).
namespace fractal {
inline constexpr int kSubdivisions = 6;
inline constexpr int kComponentsPerBranch = 8;
inline constexpr int kBranchesPerClass = (1 << (kSubdivisions + 1)) - 1; // 127
inline constexpr int kComponentsPerClass = kBranchesPerClass * kComponentsPerBranch;
inline constexpr double kRootLength = 1.5;
inline constexpr double kBranchAngleDeg = 25.0;
inline constexpr double kAngleJitterDeg = 8.0;
inline constexpr double kLengthRatio = 0.72;
inline constexpr double kLengthJitter = 0.05;
inline constexpr double kWeightDecay = 0.62;
inline constexpr double kAlongStdDivisor = 16.0;
inline constexpr double kCrossStdDivisor = 60.0;
/// Horizontal distance of each root from the vertical mirror axis.
inline constexpr double kRootOffset = 0.3;
} // namespace fractal

/// log-density floor; exp(-745) is the smallest positive double.
inline constexpr double kLogDensityFloor = -745.0;

MixtureSpec build_fractal(std::uint64_t seed);

/// Component moments of a label's distribution at noise level sigma.
struct Moments {
    Vec2 mean = Vec2::Zero();
    Mat2 covariance = Mat2::Zero();
};
Moments mixture_moments(const MixtureSpec& spec, ClassLabel label, double sigma = 0.0);

struct ScoreResult {
    Vec2 score = Vec2::Zero();
    /// All responsibilities underflowed; score is that of the nearest component.
    bool degenerate = false;
};

/// Precomputed structure-of-arrays view of one label's components. All
/// queries are const and reentrant.
class MixtureOracle {
public:
    MixtureOracle(const MixtureSpec& spec, ClassLabel label);
    explicit MixtureOracle(std::span<const MixtureComponent> components);

    double log_density(const Vec2& x, double sigma) const;
    double density(const Vec2& x, double sigma) const;
    ScoreResult score(const Vec2& x, double sigma) const;
    /// Ideal denoiser x + sigma^2 * score.
    Vec2 denoise(const Vec2& x, double sigma) const;

    Vec2 sample_one(double sigma, Rng& rng) const;
    Points sample(std::size_t count, double sigma, Rng& rng) const;

    std::size_t size() const { return log_weight_.size(); }
    /// Index of the component closest to x in Mahalanobis distance under Sigma + sigma^2 I.
    std::size_t nearest_component(const Vec2& x, double sigma) const;

private:
    std::vector<double> log_weight_, cumulative_;
    std::vector<double> mx_, my_, sxx_, sxy_, syy_;
};

double density(const MixtureSpec& spec, ClassLabel label, const Vec2& x, double sigma);
double log_density(const MixtureSpec& spec, ClassLabel label, const Vec2& x, double sigma);
ScoreResult score(const MixtureSpec& spec, ClassLabel label, const Vec2& x, double sigma);
Vec2 oracle_denoiser(const MixtureSpec& spec, ClassLabel label, const Vec2& x, double sigma);
Points sample(const MixtureSpec& spec, ClassLabel label, std::size_t count, double sigma, Rng& rng);

std::string mixture_to_json(const MixtureSpec& spec);
MixtureSpec mixture_from_json(const std::string& text);
void save_mixture(const MixtureSpec& spec, const std::filesystem::path& path);
MixtureSpec load_mixture(const std::filesystem::path& path);

} // namespace aglab
