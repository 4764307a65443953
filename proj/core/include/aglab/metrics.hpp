#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aglab/mixture.hpp"

namespace aglab {

/// Mahalanobis radius within which a sample counts as reaching a component.
inline constexpr double kCoverageRadius = 3.0;
/// Histogram extent [-kGridHalfExtent, kGridHalfExtent]^2 and resolution for grid_kl.
inline constexpr double kGridHalfExtent = 2.0;
inline constexpr int kGridResolution = 128;
/// Cell masses are integrated per component on a whitened midpoint grid
/// spanning +-kQuadratureSpan standard deviations with kQuadratureNodes nodes per axis.
inline constexpr double kQuadratureSpan = 6.0;
inline constexpr int kQuadratureNodes = 60;
/// Ground-truth draws used to calibrate the outlier threshold.
inline constexpr std::size_t kThresholdSamples = 1'000'000;
/// Mass fraction below the outlier threshold in the ground truth.
inline constexpr double kOutlierQuantile = 0.01;

struct MetricReport {
    double outlier_fraction = 0.0;
    double coverage = 0.0;
    double grid_kl = 0.0;
    /// outlier_fraction + (1 - coverage)
    double composite = 0.0;
    std::size_t population_size = 0;
    std::string fingerprint;
};

std::string metric_report_json(const MetricReport& report);

/// log-density threshold below which a kOutlierQuantile share of ground-truth
/// samples (at sigma = 0) fall.
double calibrate_outlier_threshold(const MixtureSpec& spec, int label, std::size_t count = kThresholdSamples,
                                   std::uint64_t seed = 0);

double outlier_fraction(const Points& population, const MixtureOracle& oracle, double threshold);
double coverage(const Points& population, const MixtureSpec& spec, int label, double radius = kCoverageRadius);

/// Analytic cell masses of one class on the grid_kl raster, normalized on-grid.
/// Row-major, index = row * resolution + col, row 0 at y = -extent.
/// Mass of the given components in each cell of a w x h grid over
/// [x0, x1] x [y0, y1] (row 0 at y0). With `clamp_outside` mass beyond the
/// grid lands in the nearest border cell; otherwise it is dropped.
std::vector<double> integrate_cells(std::span<const MixtureComponent> components, double x0, double y0, double x1,
                                    double y1, int width, int height, bool clamp_outside);

/// Mass outside the extent is clamped into border cells, as grid_kl does for points.
std::vector<double> reference_cell_masses(const MixtureSpec& spec, int label, int resolution = kGridResolution,
                                          double half_extent = kGridHalfExtent);

/// KL(P || Q) with P the add-one-smoothed population histogram and Q the
/// add-one-smoothed histogram expected under the reference masses. Points
/// outside the extent are clamped into border cells.
double grid_kl(const Points& population, const std::vector<double>& reference, int resolution = kGridResolution,
               double half_extent = kGridHalfExtent);

/// Per-class evaluation state: threshold and reference raster computed once.
class MetricContext {
public:
    MetricContext(const MixtureSpec& spec, int label, std::uint64_t calibration_seed = 0,
                  std::size_t calibration_samples = kThresholdSamples);
    MetricContext(const MixtureSpec& spec, int label, double threshold);

    MetricReport evaluate(const Points& population, const std::string& fingerprint = {}) const;

    double threshold() const { return threshold_; }
    int label() const { return label_; }
    const MixtureSpec& spec() const { return spec_; }
    const MixtureOracle& oracle() const { return oracle_; }

private:
    MixtureSpec spec_;
    int label_;
    MixtureOracle oracle_;
    double threshold_;
    std::vector<double> reference_;
};

} // namespace aglab
