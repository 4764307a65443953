#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>

#include "aglab/mixture.hpp"
#include "aglab/netmodel.hpp"
#include "aglab/types.hpp"

namespace aglab {

/// Identifies one batched call so stochastic denoisers can derive their
/// randomness from (call, sample) keys rather than from call order.
struct EvalContext {
    std::uint64_t call_key = 0;
    /// Stable id per column; empty means the column index.
    std::span<const std::uint64_t> sample_ids = {};

    std::uint64_t id(Eigen::Index column) const
    {
        return sample_ids.empty() ? static_cast<std::uint64_t>(column)
                                  : sample_ids[static_cast<std::size_t>(column)];
    }
};

/// Batched denoiser D(x; sigma, c). Implementations override whichever of
/// denoise/score is natural; the other follows from D = x + sigma^2 * score.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual Points denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const;
    virtual Points score(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const;

    /// Unnormalized log-density, for denoisers that represent one.
    virtual bool has_energy() const { return false; }
    virtual Eigen::RowVectorXd energy(const Points& x, double sigma, ClassLabel label) const;
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

/// A trained (or initialized) network.
class ModelDenoiser final : public Denoiser {
public:
    explicit ModelDenoiser(std::shared_ptr<const ModelParams> params);
    explicit ModelDenoiser(ModelParams params);

    Points score(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override;
    bool has_energy() const override { return params_->arch.head == HeadKind::energy; }
    Eigen::RowVectorXd energy(const Points& x, double sigma, ClassLabel label) const override;

    const ModelParams& params() const { return *params_; }
    std::shared_ptr<const ModelParams> shared_params() const { return params_; }

private:
    std::shared_ptr<const ModelParams> params_;
};

/// Exact ground-truth denoiser of a mixture (the ideal reference model).
class MixtureDenoiser final : public Denoiser {
public:
    explicit MixtureDenoiser(const MixtureSpec& spec);

    Points score(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override;
    Points denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override;
    bool has_energy() const override { return true; }
    Eigen::RowVectorXd energy(const Points& x, double sigma, ClassLabel label) const override;

private:
    const MixtureOracle& oracle(ClassLabel label) const;
    MixtureOracle class0_, class1_, marginal_;
};

/// Posterior-mean denoiser of an isotropic Gaussian N(mean, s^2 I).
class GaussianDenoiser final : public Denoiser {
public:
    GaussianDenoiser(Vec2 mean, double stddev) : mean_(std::move(mean)), stddev_(stddev) {}

    Points denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override;
    bool has_energy() const override { return true; }
    Eigen::RowVectorXd energy(const Points& x, double sigma, ClassLabel label) const override;

private:
    Vec2 mean_;
    double stddev_;
};

/// Adapter for ad-hoc denoisers (tests, experiments).
class FunctionDenoiser final : public Denoiser {
public:
    using Fn = std::function<Points(const Points&, double, ClassLabel)>;
    explicit FunctionDenoiser(Fn fn) : fn_(std::move(fn)) {}

    Points denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx = {}) const override
    {
        (void)ctx;
        return fn_(x, sigma, label);
    }

private:
    Fn fn_;
};

} // namespace aglab
