#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/LU>
#include <json.hpp>

#include "aglab/metrics.hpp"

using namespace aglab;

namespace {

const MixtureSpec& seed0()
{
    static const MixtureSpec spec = build_fractal(0);
    return spec;
}

const MetricContext& ctx0()
{
    static const MetricContext ctx(seed0(), 0);
    return ctx;
}

Points component_means(int label)
{
    const auto& comps = seed0().classes[static_cast<std::size_t>(label)];
    std::vector<Vec2> kept;
    for (const auto& c : comps) {
        kept.push_back(c.mean);
    }
    Points p(2, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        p.col(static_cast<Eigen::Index>(i)) = kept[i];
    }
    return p;
}

// Frozen measurement: grid_kl of 1e6 ground-truth draws (seed 21, class 0).
constexpr double kGtGridKlGolden = 0.001516;
constexpr double kGtGridKlGoldenTolerance = 0.0002;

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("ground-truth outlier rate matches the calibration quantile")
{
    Rng rng(99);
    const Points p = ctx0().oracle().sample(10'000, 0.0, rng);
    const double f = outlier_fraction(p, ctx0().oracle(), ctx0().threshold());
    MESSAGE("ground-truth outlier fraction " << f);
    CHECK(std::abs(f - 0.01) <= 0.003);
}

TEST_CASE("points at the mode are never outliers")
{
    const auto& comps = seed0().classes[0];
    const auto best = std::max_element(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
        return a.weight / std::sqrt(a.covariance.determinant()) < b.weight / std::sqrt(b.covariance.determinant());
    });
    Points p(2, 100);
    p.colwise() = best->mean;
    CHECK(outlier_fraction(p, ctx0().oracle(), ctx0().threshold()) == 0.0);
}

TEST_CASE("coverage of component means is complete")
{
    CHECK(coverage(component_means(0), seed0(), 0) == 1.0);
    CHECK(coverage(component_means(1), seed0(), 1) == 1.0);
}

TEST_CASE("one tree half covers at most about half")
{
    // Branches are stored breadth-first (children of i at 2i+1, 2i+2); keep the
    // components of the subtree under the root's first child.
    auto in_first_subtree = [](std::size_t branch) {
        while (branch > 2) {
            branch = (branch - 1) / 2;
        }
        return branch == 1;
    };
    const auto& comps = seed0().classes[0];
    std::vector<Vec2> kept;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        if (in_first_subtree(i / fractal::kComponentsPerBranch)) {
            kept.push_back(comps[i].mean);
        }
    }
    Points half(2, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        half.col(static_cast<Eigen::Index>(i)) = kept[i];
    }
    const double c = coverage(half, seed0(), 0);
    MESSAGE("half-tree coverage " << c << " from " << kept.size() << " components");
    CHECK(c <= 0.5 + 0.02);
    CHECK(c >= static_cast<double>(kept.size()) / static_cast<double>(comps.size()));
}

TEST_CASE("reference cell masses sum to one")
{
    const auto ref = reference_cell_masses(seed0(), 0);
    double total = 0.0;
    for (double m : ref) {
        CHECK(m >= 0.0);
        total += m;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("cell integration of a centered Gaussian")
{
    MixtureComponent c;
    c.weight = 1.0;
    c.covariance = 0.01 * Mat2::Identity();
    const std::vector<MixtureComponent> comps{c};
    const auto cells = integrate_cells(comps, -1.0, -1.0, 1.0, 1.0, 2, 2, false);
    for (double m : cells) {
        CHECK(m == doctest::Approx(0.25).epsilon(1e-9));
    }
    const auto right = integrate_cells(comps, 0.0, -1.0, 1.0, 1.0, 1, 1, false);
    CHECK(right[0] == doctest::Approx(0.5).epsilon(1e-6));
    const auto clamped = integrate_cells(comps, 0.0, -1.0, 1.0, 1.0, 1, 1, true);
    CHECK(clamped[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("grid_kl of a large ground-truth sample is small")
{
    Rng rng(21);
    const Points p = ctx0().oracle().sample(1'000'000, 0.0, rng);
    const double kl = ctx0().evaluate(p).grid_kl;
    MESSAGE("ground-truth grid_kl " << kl);
    CHECK(kl <= 0.05);
    CHECK(std::abs(kl - kGtGridKlGolden) <= kGtGridKlGoldenTolerance);
}

TEST_CASE("grid_kl grows with mass mismatch")
{
    const auto ref = reference_cell_masses(seed0(), 0);
    Rng rng(5);
    const Points gt = ctx0().oracle().sample(5000, 0.0, rng);
    Points point_mass(2, 5000);
    point_mass.colwise() = Vec2(1.5, 1.5);
    Points half = gt;
    half.rightCols(2500).colwise() = Vec2(1.5, 1.5);
    const double a = grid_kl(gt, ref), b = grid_kl(half, ref), c = grid_kl(point_mass, ref);
    MESSAGE("kl " << a << " < " << b << " < " << c);
    CHECK(a < b);
    CHECK(b < c);
    CHECK(c > 1.0);
}

TEST_CASE("composite and json report")
{
    Rng rng(6);
    const Points p = ctx0().oracle().sample(2000, 0.0, rng);
    const MetricReport r = ctx0().evaluate(p, "gt");
    CHECK(r.composite == doctest::Approx(r.outlier_fraction + 1.0 - r.coverage).epsilon(1e-15));
    CHECK(r.population_size == 2000);
    const auto j = nlohmann::json::parse(metric_report_json(r));
    CHECK(j.at("fingerprint") == "gt");
    CHECK(j.at("coverage").get<double>() == r.coverage);
    CHECK(r.coverage > 0.0);
    CHECK(r.coverage <= 1.0);
}

TEST_CASE("threshold calibration is deterministic")
{
    CHECK(calibrate_outlier_threshold(seed0(), 1, 20'000, 3) == calibrate_outlier_threshold(seed0(), 1, 20'000, 3));
    const MetricContext fixed(seed0(), 1, -1.5);
    CHECK(fixed.threshold() == -1.5);
}

TEST_CASE("empty populations are rejected")
{
    CHECK_THROWS_AS(ctx0().evaluate(Points(2, 0)), std::invalid_argument);
}

}
