#include <doctest.h>

#include <cmath>
#include <numbers>

#include "aglab/mixture.hpp"
#include "testing.hpp"

using namespace aglab;
using aglab::testing::rel_err;

namespace {

constexpr double kFdStep = 1e-4;
constexpr double kFdTolerance = 1e-5;
constexpr double kGridMassTolerance = 0.01;

std::vector<MixtureComponent> unit_gaussian(Vec2 mean, double var)
{
    MixtureComponent c;
    c.weight = 1.0;
    c.mean = mean;
    c.covariance = var * Mat2::Identity();
    return {c};
}

// Central differences at steps h and h/2 combined by Richardson extrapolation.
// Plain central differences at h = 1e-4 carry (h / scale)^2 truncation error,
// which exceeds the tolerance for components only ~0.01 wide.
Vec2 fd_gradient(const MixtureOracle& o, const Vec2& x, double sigma)
{
    auto central = [&](double h) {
        Vec2 g;
        for (int k = 0; k < 2; ++k) {
            Vec2 e = Vec2::Zero();
            e(k) = h;
            g(k) = (o.log_density(x + e, sigma) - o.log_density(x - e, sigma)) / (2.0 * h);
        }
        return g;
    };
    return (4.0 * central(0.5 * kFdStep) - central(kFdStep)) / 3.0;
}

const MixtureSpec& seed0()
{
    static const MixtureSpec spec = build_fractal(0);
    return spec;
}

} // namespace

TEST_SUITE("mixture") {

TEST_CASE("seed 0 has 1016 components per class")
{
    CHECK(seed0().component_count() == 2032);
    CHECK(seed0().classes[0].size() == 1016);
    CHECK(seed0().classes[1].size() == 1016);
}

TEST_CASE("per-class weights sum to one")
{
    for (std::uint64_t seed : {0ULL, 1ULL, 17ULL, 123456789ULL}) {
        const MixtureSpec spec = build_fractal(seed);
        for (const auto& cls : spec.classes) {
            double total = 0.0;
            for (const auto& c : cls) {
                total += c.weight;
                CHECK(c.weight > 0.0);
            }
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("construction is deterministic")
{
    CHECK(mixture_to_json(build_fractal(0)) == mixture_to_json(seed0()));
    CHECK(mixture_to_json(build_fractal(1)) != mixture_to_json(seed0()));
}

TEST_CASE("json round trip is exact")
{
    const MixtureSpec back = mixture_from_json(mixture_to_json(seed0()));
    CHECK(mixture_to_json(back) == mixture_to_json(seed0()));
    CHECK_THROWS(mixture_from_json("{\"format\": \"other\"}"));
}

TEST_CASE("isotropic Gaussian density")
{
    const auto comps = unit_gaussian(Vec2::Zero(), 0.25);
    const MixtureOracle o(comps);
    CHECK(o.density(Vec2::Zero(), 0.0) == doctest::Approx(1.0 / (2.0 * std::numbers::pi * 0.25)).epsilon(1e-12));
    CHECK(o.density(Vec2::Zero(), std::sqrt(0.75)) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK(o.density(Vec2::Zero(), 0.0) == doctest::Approx(0.636620).epsilon(1e-6));
    CHECK(o.density(Vec2::Zero(), std::sqrt(0.75)) == doctest::Approx(0.159155).epsilon(1e-6));
}

TEST_CASE("isotropic Gaussian score and denoiser")
{
    const auto comps = unit_gaussian(Vec2::Zero(), 0.25);
    const MixtureOracle o(comps);
    const Vec2 x(1.0, 0.0);
    CHECK((o.score(x, 0.0).score - Vec2(-4.0, 0.0)).norm() < 1e-12);
    CHECK((o.score(x, std::sqrt(0.75)).score - Vec2(-1.0, 0.0)).norm() < 1e-12);
    CHECK((o.denoise(x, 0.0) - x).norm() == 0.0);
    CHECK((o.denoise(x, std::sqrt(0.75)) - Vec2(0.25, 0.0)).norm() < 1e-12);
}

TEST_CASE("oracle denoiser at zero noise returns the input")
{
    const Vec2 x(0.3, -0.2);
    CHECK(oracle_denoiser(seed0(), 0, x, 0.0) == x);
}

TEST_CASE("score matches finite differences of log density")
{
    Rng rng(7);
    double worst = 0.0;
    for (double sigma : {0.01, 0.1, 1.0}) {
        for (int label = 0; label < kClassCount; ++label) {
            const MixtureOracle o(seed0(), label);
            for (int i = 0; i < 50; ++i) {
                const Vec2 x = o.sample_one(sigma, rng);
                const Vec2 s = o.score(x, sigma).score;
                const Vec2 fd = fd_gradient(o, x, sigma);
                worst = std::max(worst, (s - fd).norm() / std::max(fd.norm(), 1e-12));
            }
        }
    }
    MESSAGE("worst relative error " << worst);
    CHECK(worst < kFdTolerance);
}

TEST_CASE("far-away points keep a finite score")
{
    const MixtureOracle o(seed0(), 0);
    const Vec2 x(40.0, -40.0);
    const ScoreResult r = o.score(x, 0.0);
    CHECK(r.score.allFinite());
    CHECK(o.log_density(x, 0.0) >= kLogDensityFloor);
}

TEST_CASE("grid integral of density is one")
{
    const MixtureOracle o(seed0(), 0);
    const int n = 400;
    const double h = 4.0 / n;
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            const double wx = (i == 0 || i == n) ? 0.5 : 1.0;
            const double wy = (j == 0 || j == n) ? 0.5 : 1.0;
            total += wx * wy * o.density(Vec2(-2.0 + i * h, -2.0 + j * h), 0.1);
        }
    }
    total *= h * h;
    MESSAGE("trapezoid mass " << total);
    CHECK(std::abs(total - 1.0) < kGridMassTolerance);
}

TEST_CASE("degenerate component samples collapse to its mean")
{
    const auto comps = unit_gaussian(Vec2(3.0, 0.0), 1e-12);
    const MixtureOracle o(comps);
    Rng rng(1);
    const Points p = o.sample(5, 0.0, rng);
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
        CHECK((p.col(i) - Vec2(3.0, 0.0)).norm() < 1e-5);
    }
}

TEST_CASE("normalized marginal has per-axis std 0.5")
{
    Rng rng(3);
    const Points p = sample(seed0(), std::nullopt, 100'000, 0.0, rng);
    const Vec2 mean = p.rowwise().mean();
    const Points c = p.colwise() - mean;
    for (int k = 0; k < 2; ++k) {
        const double sd = std::sqrt(c.row(k).squaredNorm() / static_cast<double>(p.cols() - 1));
        CHECK(std::abs(sd - 0.5) < 0.01);
    }
}

TEST_CASE("noisy sample covariance matches moments")
{
    Rng rng(4);
    const double sigma = 0.5;
    const Points p = sample(seed0(), 0, 100'000, sigma, rng);
    const Moments m = mixture_moments(seed0(), 0, 0.0);
    const Mat2 expected = m.covariance + sigma * sigma * Mat2::Identity();
    const Vec2 mean = p.rowwise().mean();
    const Points c = p.colwise() - mean;
    const Mat2 cov = c * c.transpose() / static_cast<double>(p.cols() - 1);
    CHECK((cov - expected).norm() / expected.norm() < 0.02);
    CHECK(rel_err(cov(0, 0), expected(0, 0)) < 0.02);
    CHECK(rel_err(cov(1, 1), expected(1, 1)) < 0.02);
}

TEST_CASE("sampling is reproducible")
{
    Rng a(9), b(9);
    const Points pa = sample(seed0(), 1, 100, 0.05, a);
    const Points pb = sample(seed0(), 1, 100, 0.05, b);
    CHECK(pa == pb);
}

TEST_CASE("marginal density is the class average")
{
    const Vec2 x(0.1, 0.2);
    const double avg = 0.5 * (density(seed0(), 0, x, 0.05) + density(seed0(), 1, x, 0.05));
    CHECK(rel_err(density(seed0(), std::nullopt, x, 0.05), avg) < 1e-12);
}

}
