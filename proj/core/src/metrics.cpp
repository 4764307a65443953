#include "aglab/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <json.hpp>

#include "aglab/parallel.hpp"

namespace aglab {

std::string metric_report_json(const MetricReport& r)
{
    nlohmann::json j = {{"outlier_fraction", r.outlier_fraction},
                        {"coverage", r.coverage},
                        {"grid_kl", r.grid_kl},
                        {"composite", r.composite},
                        {"population_size", r.population_size},
                        {"fingerprint", r.fingerprint}};
    return j.dump(2);
}

double calibrate_outlier_threshold(const MixtureSpec& spec, int label, std::size_t count, std::uint64_t seed)
{
    if (count == 0) {
        throw std::invalid_argument("threshold calibration needs samples");
    }
    const MixtureOracle oracle(spec, label);
    Rng rng(stream_key(seed, 0x7468726573ULL, label));
    const Points pts = oracle.sample(count, 0.0, rng);
    std::vector<double> logp(count);
    parallel_for(count, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            logp[k] = oracle.log_density(pts.col(static_cast<Eigen::Index>(k)), 0.0);
        }
    });
    const auto rank = static_cast<std::size_t>(kOutlierQuantile * static_cast<double>(count));
    std::nth_element(logp.begin(), logp.begin() + static_cast<std::ptrdiff_t>(rank), logp.end());
    return logp[rank];
}

double outlier_fraction(const Points& population, const MixtureOracle& oracle, double threshold)
{
    const auto n = static_cast<std::size_t>(population.cols());
    if (n == 0) {
        return 0.0;
    }
    std::vector<unsigned char> flag(n, 0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            flag[k] = oracle.log_density(population.col(static_cast<Eigen::Index>(k)), 0.0) < threshold;
        }
    });
    const auto outliers = static_cast<double>(std::count(flag.begin(), flag.end(), 1));
    return outliers / static_cast<double>(n);
}

double coverage(const Points& population, const MixtureSpec& spec, int label, double radius)
{
    if (population.cols() == 0) {
        throw std::invalid_argument("coverage needs a nonempty population");
    }
    const auto& comps = spec.classes.at(static_cast<std::size_t>(label));
    const double r2 = radius * radius;
    std::vector<unsigned char> hit(comps.size(), 0);
    parallel_for(comps.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Mat2 prec = comps[i].covariance.inverse();
            const Vec2& mu = comps[i].mean;
            for (Eigen::Index j = 0; j < population.cols(); ++j) {
                const Vec2 d = population.col(j) - mu;
                if (d.dot(prec * d) <= r2) {
                    hit[i] = 1;
                    break;
                }
            }
        }
    });
    return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(comps.size());
}

std::vector<double> integrate_cells(std::span<const MixtureComponent> components, double x0, double y0, double x1,
                                    double y1, int width, int height, bool clamp_outside)
{
    if (width < 1 || height < 1 || !(x1 > x0) || !(y1 > y0)) {
        throw std::invalid_argument("bad integration grid");
    }
    const double step = 2.0 * kQuadratureSpan / kQuadratureNodes;
    constexpr auto nodes = static_cast<std::size_t>(kQuadratureNodes);
    std::array<double, nodes> node{}, node_weight{};
    double wsum = 0.0;
    for (std::size_t k = 0; k < nodes; ++k) {
        node[k] = -kQuadratureSpan + (static_cast<double>(k) + 0.5) * step;
        node_weight[k] = std::exp(-0.5 * node[k] * node[k]);
        wsum += node_weight[k];
    }
    for (double& w : node_weight) {
        w /= wsum;
    }
    const double cw = (x1 - x0) / width;
    const double ch = (y1 - y0) / height;
    auto bin = [](double v, double lo, double size, int n, bool clamp) {
        const double k = std::floor((v - lo) / size);
        if (!clamp && (k < 0.0 || k >= n)) {
            return -1;
        }
        return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(n - 1)));
    };
    std::vector<double> mass(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);
    for (const auto& c : components) {
        const Mat2 factor = Eigen::LLT<Mat2>(c.covariance).matrixL();
        for (std::size_t a = 0; a < nodes; ++a) {
            for (std::size_t b = 0; b < nodes; ++b) {
                const Vec2 p = c.mean + factor * Vec2(node[a], node[b]);
                const int col = bin(p.x(), x0, cw, width, clamp_outside);
                const int row = bin(p.y(), y0, ch, height, clamp_outside);
                if (col >= 0 && row >= 0) {
                    mass[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)] +=
                        c.weight * node_weight[a] * node_weight[b];
                }
            }
        }
    }
    return mass;
}

std::vector<double> reference_cell_masses(const MixtureSpec& spec, int label, int resolution, double half_extent)
{
    std::vector<double> mass = integrate_cells(spec.classes.at(static_cast<std::size_t>(label)), -half_extent,
                                               -half_extent, half_extent, half_extent, resolution, resolution, true);
    double total = 0.0;
    for (double m : mass) {
        total += m;
    }
    for (double& m : mass) {
        m /= total;
    }
    return mass;
}

double grid_kl(const Points& population, const std::vector<double>& reference, int resolution, double half_extent)
{
    const auto cells = static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
    if (reference.size() != cells) {
        throw std::invalid_argument("reference raster size does not match grid");
    }
    const auto n = static_cast<double>(population.cols());
    std::vector<double> counts(cells, 0.0);
    const double cell = 2.0 * half_extent / resolution;
    auto bin = [&](double v) {
        const int k = static_cast<int>(std::floor((v + half_extent) / cell));
        return std::clamp(k, 0, resolution - 1);
    };
    for (Eigen::Index j = 0; j < population.cols(); ++j) {
        const Vec2 p = population.col(j);
        if (!p.allFinite()) {
            throw NumericError("non-finite point in population");
        }
        counts[static_cast<std::size_t>(bin(p.y())) * static_cast<std::size_t>(resolution) +
               static_cast<std::size_t>(bin(p.x()))] += 1.0;
    }
    const double denom = n + static_cast<double>(cells);
    double kl = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        const double p = (counts[i] + 1.0) / denom;
        const double q = (n * reference[i] + 1.0) / denom;
        kl += p * std::log(p / q);
    }
    return std::max(kl, 0.0);
}

MetricContext::MetricContext(const MixtureSpec& spec, int label, std::uint64_t calibration_seed,
                             std::size_t calibration_samples)
    : MetricContext(spec, label, calibrate_outlier_threshold(spec, label, calibration_samples, calibration_seed))
{
}

MetricContext::MetricContext(const MixtureSpec& spec, int label, double threshold)
    : spec_(spec), label_(label), oracle_(spec, label), threshold_(threshold),
      reference_(reference_cell_masses(spec, label))
{
}

MetricReport MetricContext::evaluate(const Points& population, const std::string& fingerprint) const
{
    MetricReport r;
    r.population_size = static_cast<std::size_t>(population.cols());
    r.fingerprint = fingerprint;
    r.outlier_fraction = outlier_fraction(population, oracle_, threshold_);
    r.coverage = coverage(population, spec_, label_);
    r.grid_kl = grid_kl(population, reference_);
    r.composite = r.outlier_fraction + (1.0 - r.coverage);
    return r;
}

} // namespace aglab
