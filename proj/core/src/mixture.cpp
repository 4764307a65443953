#include "aglab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace aglab {

namespace {

constexpr double kLog2Pi = 1.8378770664093453; // log(2*pi)

struct Branch {
    Vec2 start;
    double angle; // radians, measured from +x
    double length;
    int level;
};

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Grows one tree breadth-first; `mirror` reflects every turn so the second
// class is the left-right mirror image of the first (with its own jitter).
std::vector<MixtureComponent> grow_tree(Vec2 root, bool mirror, Rng& rng)
{
    using namespace fractal;
    std::vector<Branch> branches;
    branches.reserve(kBranchesPerClass);
    branches.push_back({root, std::numbers::pi / 2.0, kRootLength, 0});
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const Branch parent = branches[i];
        if (parent.level == kSubdivisions) {
            continue;
        }
        const Vec2 end = parent.start + parent.length * Vec2(std::cos(parent.angle), std::sin(parent.angle));
        for (int side : {+1, -1}) {
            const double jitter = (2.0 * uniform01(rng) - 1.0) * deg(kAngleJitterDeg);
            double turn = side * deg(kBranchAngleDeg) + jitter;
            if (mirror) {
                turn = -turn;
            }
            const double ratio = kLengthRatio * (1.0 + (2.0 * uniform01(rng) - 1.0) * kLengthJitter);
            branches.push_back({end, parent.angle + turn, parent.length * ratio, parent.level + 1});
        }
    }

    std::vector<MixtureComponent> out;
    out.reserve(kComponentsPerClass);
    for (const Branch& b : branches) {
        const Vec2 dir(std::cos(b.angle), std::sin(b.angle));
        const Vec2 normal(-dir.y(), dir.x());
        const double along = b.length / kAlongStdDivisor;
        const double cross = b.length / kCrossStdDivisor;
        Mat2 rot;
        rot.col(0) = dir;
        rot.col(1) = normal;
        const Mat2 cov = rot * Vec2(along * along, cross * cross).asDiagonal() * rot.transpose();
        const double w = std::pow(kWeightDecay, b.level) / kComponentsPerBranch;
        for (int j = 0; j < kComponentsPerBranch; ++j) {
            const double t = (j + 0.5) / kComponentsPerBranch;
            MixtureComponent c;
            c.weight = w;
            c.mean = b.start + t * b.length * dir;
            c.covariance = 0.5 * (cov + cov.transpose());
            out.push_back(c);
        }
    }
    return out;
}

} // namespace

std::vector<MixtureComponent> MixtureSpec::components(ClassLabel label) const
{
    if (label) {
        if (*label < 0 || *label >= kClassCount) {
            throw std::invalid_argument("class label out of range: " + std::to_string(*label));
        }
        return classes[*label];
    }
    std::vector<MixtureComponent> all;
    all.reserve(component_count());
    for (const auto& cls : classes) {
        for (MixtureComponent c : cls) {
            c.weight *= 1.0 / kClassCount;
            all.push_back(c);
        }
    }
    return all;
}

MixtureSpec build_fractal(std::uint64_t seed)
{
    MixtureSpec spec;
    spec.seed = seed;
    for (int c = 0; c < kClassCount; ++c) {
        Rng rng(stream_key(seed, 0x7472656531ULL, c));
        const double x0 = (c == 0 ? -1.0 : 1.0) * fractal::kRootOffset;
        spec.classes[c] = grow_tree(Vec2(x0, 0.0), c == 1, rng);

        double total = 0.0;
        for (const auto& comp : spec.classes[c]) {
            total += comp.weight;
        }
        for (auto& comp : spec.classes[c]) {
            comp.weight /= total;
        }
    }

    // Normalize the class-marginal to zero mean and sigma_data per axis.
    const Moments m = mixture_moments(spec, std::nullopt);
    spec.normalization.shift = m.mean;
    spec.normalization.scale = Vec2(kSigmaData / std::sqrt(m.covariance(0, 0)),
                                    kSigmaData / std::sqrt(m.covariance(1, 1)));
    const Mat2 s = spec.normalization.scale.asDiagonal();
    for (auto& cls : spec.classes) {
        for (auto& comp : cls) {
            comp.mean = s * (comp.mean - m.mean);
            comp.covariance = s * comp.covariance * s;
        }
    }
    return spec;
}

Moments mixture_moments(const MixtureSpec& spec, ClassLabel label, double sigma)
{
    const auto comps = spec.components(label);
    Moments m;
    double total = 0.0;
    for (const auto& c : comps) {
        m.mean += c.weight * c.mean;
        total += c.weight;
    }
    m.mean /= total;
    for (const auto& c : comps) {
        const Vec2 d = c.mean - m.mean;
        m.covariance += c.weight * (c.covariance + d * d.transpose());
    }
    m.covariance /= total;
    m.covariance += sigma * sigma * Mat2::Identity();
    return m;
}

// ---------------------------------------------------------------------------
// MixtureOracle

MixtureOracle::MixtureOracle(const MixtureSpec& spec, ClassLabel label)
    : MixtureOracle(spec.components(label))
{
}

MixtureOracle::MixtureOracle(std::span<const MixtureComponent> components)
{
    if (components.empty()) {
        throw std::invalid_argument("mixture has no components");
    }
    const std::size_t n = components.size();
    log_weight_.resize(n);
    cumulative_.resize(n);
    mx_.resize(n);
    my_.resize(n);
    sxx_.resize(n);
    sxy_.resize(n);
    syy_.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = components[i];
        if (c.weight < 0.0) {
            throw std::invalid_argument("negative mixture weight");
        }
        log_weight_[i] = c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
        acc += c.weight;
        cumulative_[i] = acc;
        mx_[i] = c.mean.x();
        my_[i] = c.mean.y();
        sxx_[i] = c.covariance(0, 0);
        sxy_[i] = 0.5 * (c.covariance(0, 1) + c.covariance(1, 0));
        syy_[i] = c.covariance(1, 1);
    }
    for (auto& v : cumulative_) {
        v /= acc;
    }
}

namespace {

struct Term {
    double log_term;
    double gx, gy; // (Sigma*)^{-1} (mu - x)
    double mahalanobis;
};

template <typename Fn>
void for_each_term(std::size_t n, const double* lw, const double* mx, const double* my, const double* sxx,
                   const double* sxy, const double* syy, const Vec2& x, double sigma, Fn&& fn)
{
    const double s2 = sigma * sigma;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = sxx[i] + s2;
        const double b = sxy[i];
        const double c = syy[i] + s2;
        const double det = a * c - b * b;
        const double dx = mx[i] - x.x();
        const double dy = my[i] - x.y();
        const double gx = (c * dx - b * dy) / det;
        const double gy = (a * dy - b * dx) / det;
        const double q = dx * gx + dy * gy;
        fn(i, Term{lw[i] - kLog2Pi - 0.5 * std::log(det) - 0.5 * q, gx, gy, q});
    }
}

} // namespace

double MixtureOracle::log_density(const Vec2& x, double sigma) const
{
    if (sigma < 0.0) {
        throw std::invalid_argument("noise level must be nonnegative");
    }
    thread_local std::vector<double> terms;
    terms.resize(size());
    double peak = -std::numeric_limits<double>::infinity();
    for_each_term(size(), log_weight_.data(), mx_.data(), my_.data(), sxx_.data(), sxy_.data(), syy_.data(), x,
                  sigma, [&](std::size_t i, const Term& t) {
                      terms[i] = t.log_term;
                      peak = std::max(peak, t.log_term);
                  });
    if (!std::isfinite(peak)) {
        return kLogDensityFloor;
    }
    double sum = 0.0;
    for (double t : terms) {
        sum += std::exp(t - peak);
    }
    return std::max(peak + std::log(sum), kLogDensityFloor);
}

double MixtureOracle::density(const Vec2& x, double sigma) const
{
    const double ld = log_density(x, sigma);
    return ld <= kLogDensityFloor ? 0.0 : std::exp(ld);
}

std::size_t MixtureOracle::nearest_component(const Vec2& x, double sigma) const
{
    std::size_t best = 0;
    double best_q = std::numeric_limits<double>::infinity();
    for_each_term(size(), log_weight_.data(), mx_.data(), my_.data(), sxx_.data(), sxy_.data(), syy_.data(), x,
                  sigma, [&](std::size_t i, const Term& t) {
                      if (t.mahalanobis < best_q) {
                          best_q = t.mahalanobis;
                          best = i;
                      }
                  });
    return best;
}

ScoreResult MixtureOracle::score(const Vec2& x, double sigma) const
{
    if (sigma < 0.0) {
        throw std::invalid_argument("noise level must be nonnegative");
    }
    thread_local std::vector<Term> terms;
    terms.resize(size());
    double peak = -std::numeric_limits<double>::infinity();
    for_each_term(size(), log_weight_.data(), mx_.data(), my_.data(), sxx_.data(), sxy_.data(), syy_.data(), x,
                  sigma, [&](std::size_t i, const Term& t) {
                      terms[i] = t;
                      peak = std::max(peak, t.log_term);
                  });

    ScoreResult out;
    if (!(peak > kLogDensityFloor)) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < terms.size(); ++i) {
            if (terms[i].mahalanobis < terms[best].mahalanobis) {
                best = i;
            }
        }
        out.score = Vec2(terms[best].gx, terms[best].gy);
        out.degenerate = true;
        return out;
    }
    double sum = 0.0, sx = 0.0, sy = 0.0;
    for (const Term& t : terms) {
        const double r = std::exp(t.log_term - peak);
        sum += r;
        sx += r * t.gx;
        sy += r * t.gy;
    }
    out.score = Vec2(sx / sum, sy / sum);
    return out;
}

Vec2 MixtureOracle::denoise(const Vec2& x, double sigma) const
{
    if (sigma == 0.0) {
        return x;
    }
    return x + sigma * sigma * score(x, sigma).score;
}

Vec2 MixtureOracle::sample_one(double sigma, Rng& rng) const
{
    const double u = uniform01(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
    i = std::min(i, size() - 1);
    const double s2 = sigma * sigma;
    // Cholesky of [[a, b], [b, c]].
    const double a = sxx_[i] + s2;
    const double b = sxy_[i];
    const double c = syy_[i] + s2;
    const double l11 = std::sqrt(a);
    const double l21 = b / l11;
    const double l22 = std::sqrt(std::max(c - l21 * l21, 0.0));
    const double z1 = standard_normal(rng);
    const double z2 = standard_normal(rng);
    return Vec2(mx_[i] + l11 * z1, my_[i] + l21 * z1 + l22 * z2);
}

Points MixtureOracle::sample(std::size_t count, double sigma, Rng& rng) const
{
    if (sigma < 0.0) {
        throw std::invalid_argument("noise level must be nonnegative");
    }
    Points out(2, static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < count; ++k) {
        out.col(static_cast<Eigen::Index>(k)) = sample_one(sigma, rng);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convenience free functions

double density(const MixtureSpec& spec, ClassLabel label, const Vec2& x, double sigma)
{
    return MixtureOracle(spec, label).density(x, sigma);
}

double log_density(const MixtureSpec& spec, ClassLabel label, const Vec2& x, double sigma)
{
    return MixtureOracle(spec, label).log_density(x, sigma);
}

ScoreResult score(const MixtureSpec& spec, ClassLabel label, const Vec2& x, double sigma)
{
    return MixtureOracle(spec, label).score(x, sigma);
}

Vec2 oracle_denoiser(const MixtureSpec& spec, ClassLabel label, const Vec2& x, double sigma)
{
    return MixtureOracle(spec, label).denoise(x, sigma);
}

Points sample(const MixtureSpec& spec, ClassLabel label, std::size_t count, double sigma, Rng& rng)
{
    if (count == 0) {
        throw std::invalid_argument("sample count must be positive");
    }
    return MixtureOracle(spec, label).sample(count, sigma, rng);
}

// ---------------------------------------------------------------------------
// JSON

std::string mixture_to_json(const MixtureSpec& spec)
{
    using nlohmann::json;
    json j;
    j["format"] = "aglab-mixture";
    j["version"] = 1;
    j["seed"] = spec.seed;
    j["sigma_data"] = kSigmaData;
    j["normalization"] = {{"shift", {spec.normalization.shift.x(), spec.normalization.shift.y()}},
                          {"scale", {spec.normalization.scale.x(), spec.normalization.scale.y()}}};
    json classes = json::array();
    for (const auto& cls : spec.classes) {
        json arr = json::array();
        for (const auto& c : cls) {
            arr.push_back({{"weight", c.weight},
                           {"mean", {c.mean.x(), c.mean.y()}},
                           {"cov", {c.covariance(0, 0), c.covariance(0, 1), c.covariance(1, 0), c.covariance(1, 1)}}});
        }
        classes.push_back(std::move(arr));
    }
    j["classes"] = std::move(classes);
    return j.dump(1);
}

MixtureSpec mixture_from_json(const std::string& text)
{
    using nlohmann::json;
    MixtureSpec spec;
    try {
        const json j = json::parse(text);
        spec.seed = j.at("seed").get<std::uint64_t>();
        const auto& n = j.at("normalization");
        spec.normalization.shift = Vec2(n.at("shift")[0].get<double>(), n.at("shift")[1].get<double>());
        spec.normalization.scale = Vec2(n.at("scale")[0].get<double>(), n.at("scale")[1].get<double>());
        const auto& classes = j.at("classes");
        if (classes.size() != kClassCount) {
            throw std::invalid_argument("mixture JSON must hold exactly two classes");
        }
        for (int c = 0; c < kClassCount; ++c) {
            for (const auto& item : classes[c]) {
                MixtureComponent comp;
                comp.weight = item.at("weight").get<double>();
                comp.mean = Vec2(item.at("mean")[0].get<double>(), item.at("mean")[1].get<double>());
                const auto& cov = item.at("cov");
                comp.covariance << cov[0].get<double>(), cov[1].get<double>(), cov[2].get<double>(),
                    cov[3].get<double>();
                spec.classes[c].push_back(comp);
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed mixture JSON: ") + e.what());
    }
    return spec;
}

void save_mixture(const MixtureSpec& spec, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << mixture_to_json(spec) << '\n';
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

MixtureSpec load_mixture(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open for reading: " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return mixture_from_json(ss.str());
}

} // namespace aglab
