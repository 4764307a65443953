#include "aglab/denoiser.hpp"

#include <cmath>
#include <stdexcept>

namespace aglab {

Points Denoiser::denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx) const
{
    return x + sigma * sigma * score(x, sigma, label, ctx);
}

Points Denoiser::score(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx) const
{
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("score requires sigma > 0");
    }
    return (denoise(x, sigma, label, ctx) - x) / (sigma * sigma);
}

Eigen::RowVectorXd Denoiser::energy(const Points&, double, ClassLabel) const
{
    throw std::invalid_argument("denoiser does not expose an energy");
}

ModelDenoiser::ModelDenoiser(std::shared_ptr<const ModelParams> params) : params_(std::move(params))
{
    if (!params_) {
        throw std::invalid_argument("null model parameters");
    }
}

ModelDenoiser::ModelDenoiser(ModelParams params)
    : ModelDenoiser(std::make_shared<const ModelParams>(std::move(params)))
{
}

Points ModelDenoiser::score(const Points& x, double sigma, ClassLabel label, const EvalContext&) const
{
    return model_score_batch(*params_, x, sigma, label);
}

Eigen::RowVectorXd ModelDenoiser::energy(const Points& x, double sigma, ClassLabel label) const
{
    return model_energy_batch(*params_, x, sigma, label);
}

MixtureDenoiser::MixtureDenoiser(const MixtureSpec& spec)
    : class0_(spec, 0), class1_(spec, 1), marginal_(spec, std::nullopt)
{
}

const MixtureOracle& MixtureDenoiser::oracle(ClassLabel label) const
{
    if (!label) {
        return marginal_;
    }
    if (*label == 0) {
        return class0_;
    }
    if (*label == 1) {
        return class1_;
    }
    throw std::invalid_argument("class label out of range");
}

Points MixtureDenoiser::score(const Points& x, double sigma, ClassLabel label, const EvalContext&) const
{
    const MixtureOracle& o = oracle(label);
    Points out(2, x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        out.col(j) = o.score(x.col(j), sigma).score;
    }
    return out;
}

Points MixtureDenoiser::denoise(const Points& x, double sigma, ClassLabel label, const EvalContext& ctx) const
{
    if (sigma == 0.0) {
        return x;
    }
    return x + sigma * sigma * score(x, sigma, label, ctx);
}

Eigen::RowVectorXd MixtureDenoiser::energy(const Points& x, double sigma, ClassLabel label) const
{
    const MixtureOracle& o = oracle(label);
    Eigen::RowVectorXd out(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        out(j) = o.log_density(x.col(j), sigma);
    }
    return out;
}

Points GaussianDenoiser::denoise(const Points& x, double sigma, ClassLabel, const EvalContext&) const
{
    const double s2 = stddev_ * stddev_;
    const double k = s2 / (s2 + sigma * sigma);
    return (k * x).colwise() + (1.0 - k) * mean_;
}

Eigen::RowVectorXd GaussianDenoiser::energy(const Points& x, double sigma, ClassLabel) const
{
    const double var = stddev_ * stddev_ + sigma * sigma;
    return -0.5 * (x.colwise() - mean_).colwise().squaredNorm() / var;
}

} // namespace aglab
