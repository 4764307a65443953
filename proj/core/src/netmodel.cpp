#include "aglab/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "aglab/rng.hpp"

namespace aglab {

using Eigen::Index;
using Eigen::MatrixXd;

std::string to_string(HeadKind head)
{
    return head == HeadKind::energy ? "energy" : "direct_score";
}

HeadKind head_from_string(const std::string& name)
{
    if (name == "energy") {
        return HeadKind::energy;
    }
    if (name == "direct_score") {
        return HeadKind::direct_score;
    }
    throw std::invalid_argument("unknown head kind: " + name);
}

std::string to_string(LossKind kind)
{
    return kind == LossKind::exact_sm ? "exact_sm" : "denoising_sm";
}

LossKind loss_kind_from_string(const std::string& name)
{
    if (name == "exact_sm") {
        return LossKind::exact_sm;
    }
    if (name == "denoising_sm") {
        return LossKind::denoising_sm;
    }
    throw std::invalid_argument("unknown loss kind: " + name);
}

void ArchDescriptor::validate() const
{
    if (hidden_width != 16 && hidden_width != 32 && hidden_width != 64 && hidden_width != 128) {
        throw std::invalid_argument("hidden_width must be one of 16, 32, 64, 128");
    }
    if (hidden_layers < 1) {
        throw std::invalid_argument("hidden_layers must be positive");
    }
    if (class_count != 0 && class_count != kClassCount) {
        throw std::invalid_argument("class_count must be 0 (unconditional) or 2");
    }
}

std::size_t ModelParams::parameter_count() const
{
    std::size_t n = 1;
    for (const auto& w : layers) {
        n += static_cast<std::size_t>(w.size());
    }
    return n;
}

ModelParams ModelParams::zeros_like() const
{
    ModelParams z = *this;
    for (auto& w : z.layers) {
        w.setZero();
    }
    z.output_gain = 0.0;
    return z;
}

void ModelParams::flatten(std::vector<double>& out) const
{
    out.clear();
    out.reserve(parameter_count());
    for (const auto& w : layers) {
        out.insert(out.end(), w.data(), w.data() + w.size());
    }
    out.push_back(output_gain);
}

void ModelParams::unflatten(std::span<const double> values)
{
    if (values.size() != parameter_count()) {
        throw std::invalid_argument("flat parameter vector has wrong length");
    }
    std::size_t pos = 0;
    for (auto& w : layers) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), w.size(), w.data());
        pos += static_cast<std::size_t>(w.size());
    }
    output_gain = values[pos];
}

ModelParams init_model(const ArchDescriptor& arch, std::uint64_t seed)
{
    arch.validate();
    ModelParams p;
    p.arch = arch;
    Rng rng(stream_key(seed, 0x696e6974ULL));
    int in = arch.input_dim();
    for (int l = 0; l < arch.layer_count(); ++l) {
        const int out = (l + 1 == arch.layer_count()) ? arch.output_dim() : arch.hidden_width;
        MatrixXd w(out, in);
        // Row-major fill order keeps the stream layout independent of storage order.
        for (int r = 0; r < out; ++r) {
            for (int c = 0; c < in; ++c) {
                w(r, c) = standard_normal(rng);
            }
        }
        p.layers.push_back(std::move(w));
        in = out;
    }
    p.output_gain = 0.0;
    return p;
}

namespace {

// ---------------------------------------------------------------------------
// Forward kernel. Every output column is accumulated in the same order
// regardless of how many columns are processed together, so evaluations are
// independent of batch composition. The backward pass only ever sees whole
// gradient shards and uses Eigen's products.

// Z = W * S
void matmul(const MatrixXd& W, const MatrixXd& S, MatrixXd& Z)
{
    const Index m = W.rows(), K = W.cols(), n = S.cols();
    Z.resize(m, n);
    Index j = 0;
    for (; j + 4 <= n; j += 4) {
        double* z0 = Z.col(j).data();
        double* z1 = Z.col(j + 1).data();
        double* z2 = Z.col(j + 2).data();
        double* z3 = Z.col(j + 3).data();
        std::fill(z0, z0 + m, 0.0);
        std::fill(z1, z1 + m, 0.0);
        std::fill(z2, z2 + m, 0.0);
        std::fill(z3, z3 + m, 0.0);
        for (Index k = 0; k < K; ++k) {
            const double s0 = S(k, j), s1 = S(k, j + 1), s2 = S(k, j + 2), s3 = S(k, j + 3);
            const double* w = W.col(k).data();
            for (Index i = 0; i < m; ++i) {
                const double wi = w[i];
                z0[i] += wi * s0;
                z1[i] += wi * s1;
                z2[i] += wi * s2;
                z3[i] += wi * s3;
            }
        }
    }
    for (; j < n; ++j) {
        double* z = Z.col(j).data();
        std::fill(z, z + m, 0.0);
        for (Index k = 0; k < K; ++k) {
            const double s = S(k, j);
            const double* w = W.col(k).data();
            for (Index i = 0; i < m; ++i) {
                z[i] += w[i] * s;
            }
        }
    }
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

struct Activation {
    double value, d1, d2;
};

Activation mp_silu(double u)
{
    const double s = sigmoid(u);
    const double ds = s * (1.0 - s);
    constexpr double k = 1.0 / kMpSiluScale;
    return {k * u * s, k * (s + u * ds), k * (2.0 * ds + u * ds * (1.0 - 2.0 * s))};
}

struct NormalizedLayer {
    MatrixXd w;           // unit-norm rows
    Eigen::VectorXd norm; // raw row norms
};

NormalizedLayer normalize_rows(const MatrixXd& raw)
{
    NormalizedLayer out;
    out.norm = raw.rowwise().norm();
    out.w = raw;
    for (Index r = 0; r < raw.rows(); ++r) {
        if (!(out.norm(r) > 0.0) || !std::isfinite(out.norm(r))) {
            throw NumericError("weight row " + std::to_string(r) + " has zero or non-finite norm");
        }
        out.w.row(r) /= out.norm(r);
    }
    return out;
}

// Everything the backward pass needs from a forward evaluation.
struct Trace {
    Index batch = 0;
    int lanes = 1; // 3 with input tangents (value, d/dx, d/dy), 1 otherwise
    std::vector<NormalizedLayer> layers;
    std::vector<MatrixXd> inputs;      // layer inputs, lanes*batch columns
    std::vector<MatrixXd> pre;         // pre-activations
    std::vector<MatrixXd> masks;       // hidden multipliers (batch columns) or empty
    Eigen::RowVectorXd inv_scale;      // 1 / sqrt(sigma^2 + sigma_data^2)
    Points x_star;
};

void check_query(const ModelParams& params, const ModelQuery& q)
{
    const auto n = static_cast<std::size_t>(q.x.cols());
    if (q.sigma.size() != n || q.labels.size() != n) {
        throw std::invalid_argument("model query arrays have mismatched lengths");
    }
    for (std::size_t b = 0; b < n; ++b) {
        if (!(q.sigma[b] > 0.0)) {
            throw std::invalid_argument("model evaluation requires sigma > 0");
        }
        if (params.arch.class_count > 0 && q.labels[b] && (*q.labels[b] < 0 || *q.labels[b] >= kClassCount)) {
            throw std::invalid_argument("class label out of range");
        }
    }
    if (static_cast<int>(params.layers.size()) != params.arch.layer_count()) {
        throw std::invalid_argument("parameter layer count does not match architecture");
    }
}

void forward(const ModelParams& params, const ModelQuery& q, const MaskFn* mask, Trace& t)
{
    check_query(params, q);
    const ArchDescriptor& arch = params.arch;
    const Index B = q.x.cols();
    t.batch = B;
    t.lanes = arch.head == HeadKind::energy ? 3 : 1;
    const Index cols = t.lanes * B;
    const int L = arch.layer_count();

    t.layers.clear();
    for (const auto& w : params.layers) {
        t.layers.push_back(normalize_rows(w));
    }
    t.inputs.assign(L, MatrixXd());
    t.pre.assign(L, MatrixXd());
    t.masks.assign(L, MatrixXd());

    t.inv_scale.resize(B);
    t.x_star.resize(2, B);
    MatrixXd& in0 = t.inputs[0];
    in0.setZero(arch.input_dim(), cols);
    const double sd2 = params.sigma_data * params.sigma_data;
    for (Index b = 0; b < B; ++b) {
        const double sigma = q.sigma[static_cast<std::size_t>(b)];
        const double inv_s = 1.0 / std::sqrt(sigma * sigma + sd2);
        t.inv_scale(b) = inv_s;
        t.x_star.col(b) = q.x.col(b) * inv_s;
        in0(0, b) = t.x_star(0, b);
        in0(1, b) = t.x_star(1, b);
        in0(2, b) = 0.25 * std::log(sigma);
        in0(3, b) = 1.0;
        if (arch.class_count > 0) {
            const ClassLabel& c = q.labels[static_cast<std::size_t>(b)];
            if (c) {
                in0(4 + *c, b) = 1.0;
            }
        }
        if (t.lanes == 3) {
            in0(0, B + b) = inv_s;
            in0(1, 2 * B + b) = inv_s;
        }
    }

    for (int l = 0; l < L; ++l) {
        matmul(t.layers[l].w, t.inputs[l], t.pre[l]);
        if (l + 1 == L) {
            break;
        }
        const MatrixXd& z = t.pre[l];
        MatrixXd& next = t.inputs[l + 1];
        next.resize(z.rows(), cols);
        MatrixXd& m = t.masks[l];
        if (mask != nullptr) {
            m.setOnes(z.rows(), B);
            (*mask)(l, m);
        }
        for (Index b = 0; b < B; ++b) {
            for (Index i = 0; i < z.rows(); ++i) {
                const Activation a = mp_silu(z(i, b));
                const double keep = m.size() ? m(i, b) : 1.0;
                next(i, b) = a.value * keep;
                for (int lane = 1; lane < t.lanes; ++lane) {
                    next(i, lane * B + b) = a.d1 * z(i, lane * B + b) * keep;
                }
            }
        }
    }
}

void outputs_from_trace(const ModelParams& params, const ModelQuery& q, const Trace& t, ModelOutputs& out,
                        bool want_energy)
{
    const Index B = t.batch;
    const MatrixXd& f = t.pre.back();
    out.score.resize(2, B);
    const double g = params.output_gain;
    if (params.arch.head == HeadKind::energy) {
        const double n = params.arch.hidden_width;
        if (want_energy) {
            out.energy.resize(B);
        }
        for (Index b = 0; b < B; ++b) {
            const double sigma = q.sigma[static_cast<std::size_t>(b)];
            const double coef = g / (sigma * n);
            double fx = 0.0, fy = 0.0, ff = 0.0;
            for (Index i = 0; i < f.rows(); ++i) {
                const double v = f(i, b);
                ff += v * v;
                fx += v * f(i, B + b);
                fy += v * f(i, 2 * B + b);
            }
            out.score(0, b) = -t.x_star(0, b) * t.inv_scale(b) - 2.0 * coef * fx;
            out.score(1, b) = -t.x_star(1, b) * t.inv_scale(b) - 2.0 * coef * fy;
            if (want_energy) {
                out.energy(b) = -0.5 * t.x_star.col(b).squaredNorm() - coef * ff;
            }
        }
    } else {
        if (want_energy) {
            throw std::invalid_argument("direct_score head has no energy output");
        }
        for (Index b = 0; b < B; ++b) {
            const double sigma = q.sigma[static_cast<std::size_t>(b)];
            const double s2 = sigma * sigma;
            const double c_out = sigma * params.sigma_data * t.inv_scale(b);
            const double k = g * c_out / s2;
            const double prior = t.inv_scale(b) * t.inv_scale(b);
            out.score(0, b) = -q.x(0, b) * prior + k * f(0, b);
            out.score(1, b) = -q.x(1, b) * prior + k * f(1, b);
        }
    }
}

} // namespace

void evaluate_model(const ModelParams& params, const ModelQuery& query, ModelOutputs& out, bool want_energy,
                    const MaskFn* mask)
{
    if (want_energy && params.arch.head != HeadKind::energy) {
        throw std::invalid_argument("energy requested from a direct_score model");
    }
    Trace t;
    forward(params, query, mask, t);
    outputs_from_trace(params, query, t, out, want_energy);
}

Points model_score_batch(const ModelParams& params, const Points& x, double sigma, ClassLabel label,
                         const MaskFn* mask)
{
    const std::vector<double> s(static_cast<std::size_t>(x.cols()), sigma);
    const std::vector<ClassLabel> c(static_cast<std::size_t>(x.cols()), label);
    ModelOutputs out;
    evaluate_model(params, ModelQuery{x, s, c}, out, false, mask);
    return out.score;
}

Eigen::RowVectorXd model_energy_batch(const ModelParams& params, const Points& x, double sigma, ClassLabel label)
{
    const std::vector<double> s(static_cast<std::size_t>(x.cols()), sigma);
    const std::vector<ClassLabel> c(static_cast<std::size_t>(x.cols()), label);
    ModelOutputs out;
    evaluate_model(params, ModelQuery{x, s, c}, out, true);
    return out.energy;
}

double energy(const ModelParams& params, const Vec2& x, double sigma, ClassLabel label)
{
    const Points p = x;
    return model_energy_batch(params, p, sigma, label)(0);
}

Vec2 score_of_model(const ModelParams& params, const Vec2& x, double sigma, ClassLabel label)
{
    const Points p = x;
    return model_score_batch(params, p, sigma, label).col(0);
}

Vec2 denoise(const ModelParams& params, const Vec2& x, double sigma, ClassLabel label)
{
    return x + sigma * sigma * score_of_model(params, x, sigma, label);
}

std::vector<MatrixXd> hidden_activations(const ModelParams& params, const Points& x, double sigma, ClassLabel label,
                                         const MaskFn* mask)
{
    const std::vector<double> s(static_cast<std::size_t>(x.cols()), sigma);
    const std::vector<ClassLabel> c(static_cast<std::size_t>(x.cols()), label);
    Trace t;
    forward(params, ModelQuery{x, s, c}, mask, t);
    std::vector<MatrixXd> out;
    for (std::size_t l = 1; l < t.inputs.size(); ++l) {
        out.push_back(t.inputs[l].leftCols(t.batch));
    }
    return out;
}

GradientResult grad_params(const ModelParams& params, const TrainingBatch& batch)
{
    const std::size_t n = batch.size();
    if (n == 0) {
        throw std::invalid_argument("training batch is empty");
    }
    if (static_cast<std::size_t>(batch.x.cols()) != n || static_cast<std::size_t>(batch.target.cols()) != n ||
        batch.labels.size() != n || (!batch.weight.empty() && batch.weight.size() != n)) {
        throw std::invalid_argument("training batch arrays have mismatched lengths");
    }

    const ModelQuery q{batch.x, batch.sigma, batch.labels};
    Trace t;
    forward(params, q, nullptr, t);
    ModelOutputs out;
    outputs_from_trace(params, q, t, out, false);

    const Index B = t.batch;
    const int lanes = t.lanes;
    const int L = params.arch.layer_count();
    const double inv_n = 1.0 / static_cast<double>(n);

    // d loss / d score, per column.
    Points gbar(2, B);
    double loss = 0.0;
    for (Index b = 0; b < B; ++b) {
        const auto ub = static_cast<std::size_t>(b);
        const double lambda = batch.weight.empty() ? batch.sigma[ub] * batch.sigma[ub] : batch.weight[ub];
        const Vec2 r = out.score.col(b) - batch.target.col(b);
        const double sample_loss = lambda * r.squaredNorm();
        if (!std::isfinite(sample_loss)) {
            std::ostringstream msg;
            msg << "non-finite loss at batch sample " << b << " (sigma=" << batch.sigma[ub] << ")";
            throw NumericError(msg.str());
        }
        loss += sample_loss;
        gbar.col(b) = 2.0 * lambda * inv_n * r;
    }
    loss *= inv_n;

    GradientResult result;
    result.gradient = params.zeros_like();
    result.loss = loss;

    const MatrixXd& f = t.pre.back();
    const double g = params.output_gain;
    MatrixXd zbar(f.rows(), lanes * B);
    double gain_grad = 0.0;
    if (params.arch.head == HeadKind::energy) {
        const double width = params.arch.hidden_width;
        for (Index b = 0; b < B; ++b) {
            const double sigma = batch.sigma[static_cast<std::size_t>(b)];
            const double c = -2.0 / (sigma * width);
            const double gx = gbar(0, b), gy = gbar(1, b);
            double fx = 0.0, fy = 0.0;
            for (Index i = 0; i < f.rows(); ++i) {
                const double v = f(i, b), tx = f(i, B + b), ty = f(i, 2 * B + b);
                fx += v * tx;
                fy += v * ty;
                zbar(i, b) = c * g * (gx * tx + gy * ty);
                zbar(i, B + b) = c * g * gx * v;
                zbar(i, 2 * B + b) = c * g * gy * v;
            }
            gain_grad += c * (gx * fx + gy * fy);
        }
    } else {
        for (Index b = 0; b < B; ++b) {
            const double sigma = batch.sigma[static_cast<std::size_t>(b)];
            const double c_out = sigma * params.sigma_data * t.inv_scale(b);
            const double k = c_out / (sigma * sigma);
            zbar(0, b) = g * k * gbar(0, b);
            zbar(1, b) = g * k * gbar(1, b);
            gain_grad += k * (gbar(0, b) * f(0, b) + gbar(1, b) * f(1, b));
        }
    }
    result.gradient.output_gain = gain_grad;

    MatrixXd abar;
    for (int l = L - 1; l >= 0; --l) {
        const NormalizedLayer& layer = t.layers[l];
        MatrixXd gw;
        gw.noalias() = zbar * t.inputs[l].transpose();
        // Through the row normalization w_hat = w / |w|.
        MatrixXd& raw_grad = result.gradient.layers[l];
        for (Index r = 0; r < gw.rows(); ++r) {
            const double proj = gw.row(r).dot(layer.w.row(r));
            raw_grad.row(r) = (gw.row(r) - proj * layer.w.row(r)) / layer.norm(r);
        }
        if (l == 0) {
            break;
        }
        abar.noalias() = layer.w.transpose() * zbar;

        // Through mask and activation of layer l-1.
        const MatrixXd& z = t.pre[l - 1];
        const MatrixXd& m = t.masks[l - 1];
        zbar.resize(z.rows(), lanes * B);
        for (Index b = 0; b < B; ++b) {
            for (Index i = 0; i < z.rows(); ++i) {
                const Activation a = mp_silu(z(i, b));
                const double keep = m.size() ? m(i, b) : 1.0;
                double v = abar(i, b) * keep * a.d1;
                for (int lane = 1; lane < lanes; ++lane) {
                    const double tb = abar(i, lane * B + b) * keep;
                    v += tb * a.d2 * z(i, lane * B + b);
                    zbar(i, lane * B + b) = tb * a.d1;
                }
                zbar(i, b) = v;
            }
        }
    }
    return result;
}

} // namespace aglab
