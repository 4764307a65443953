#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aglab/denoiser.hpp"
#include "aglab/mixture.hpp"

namespace aglab {

struct Extent {
    double x0 = -2.0, y0 = -2.0, x1 = 2.0, y1 = 2.0;
    bool operator==(const Extent&) const = default;
};

enum class FieldKind { density, log_ratio, score_field };

std::string to_string(FieldKind kind);

/// Cell-centered samples on a regular grid. Row 0 is the bottom row (y0).
struct FieldRaster {
    Extent extent;
    int width = 0;
    int height = 0;
    FieldKind kind = FieldKind::density;
    std::vector<double> values;  // width * height scalars, possibly empty for pure vector fields
    Points vectors;              // 2 x (width * height), or empty

    double cell_width() const { return (extent.x1 - extent.x0) / width; }
    double cell_height() const { return (extent.y1 - extent.y0) / height; }
    double cell_area() const { return cell_width() * cell_height(); }
    Vec2 center(int col, int row) const;
    /// All cell centers, column index = row * width + col.
    Points centers() const;
    void validate() const;
};

inline constexpr int kMinRasterSide = 16;

/// Exact mixture density at cell centers.
FieldRaster raster_density(const MixtureSpec& spec, ClassLabel label, double sigma, const Extent& extent,
                           int width, int height);
/// exp(G) of an energy model, scaled so that sum(values) * cell_area = 1.
/// This grid normalization stands in for the intractable normalizer.
FieldRaster raster_density(const Denoiser& model, ClassLabel label, double sigma, const Extent& extent, int width,
                           int height);
/// log(p_main / p_guide) up to a constant (when both expose energies) and its gradient.
FieldRaster raster_log_ratio(const Denoiser& main, ClassLabel main_label, const Denoiser& guide,
                             ClassLabel guide_label, double sigma, const Extent& extent, int width, int height);
FieldRaster raster_score_field(const Denoiser& model, ClassLabel label, double sigma, const Extent& extent, int width,
                               int height);

/// Entropy of the raster viewed as a distribution over cells.
double raster_entropy(const FieldRaster& raster);

/// For each mass fraction, the largest density level whose superlevel set
/// holds at least that fraction of the raster's mass.
std::vector<double> contour_levels(const FieldRaster& raster, const std::vector<double>& mass_fractions);

using Rgb = std::array<std::uint8_t, 3>;

enum class HeatScale { linear, sqrt, log, diverging };

struct Layer {
    std::optional<FieldRaster> heat;
    HeatScale heat_scale = HeatScale::sqrt;
    /// Contour lines drawn on `contour_field` (falls back to `heat`).
    std::optional<FieldRaster> contour_field;
    std::vector<double> contour_levels;
    Points scatter;
    std::optional<FieldRaster> vectors;
    std::vector<Points> trajectories;
    Rgb color{230, 90, 40};
};

struct Style {
    int width = 512;
    int height = 512;
    Extent extent;
    Rgb background{255, 255, 255};
    int quiver_grid = 24;
    int point_radius = 0;
};

/// Flattened drawing primitives; what the sidecar CSV stores.
struct PlotData {
    struct Heat {
        int layer;
        int width, height;
        HeatScale scale;
        std::vector<double> values;
    };
    struct Contour {
        int layer;
        int width, height;
        std::vector<double> values;
        std::vector<double> levels;
    };
    struct Mark {
        int layer;
        int group; // trajectory index, or -1 for scatter / arrows
        double x, y, u, v;
    };
    Style style;
    std::vector<Rgb> colors;
    std::vector<Heat> heats;
    std::vector<Contour> contours;
    std::vector<Mark> points, arrows, paths;
};

PlotData compile_plot(const std::vector<Layer>& layers, const Style& style);

struct Image {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb;
};

Image draw_plot(const PlotData& plot);

std::string ppm_bytes(const Image& image);
std::string plot_csv(const PlotData& plot);
PlotData plot_from_csv(const std::string& text);

/// Writes `path` (P6 PPM) and `path` with extension .csv; returns the CSV path.
std::filesystem::path render_figure(const std::vector<Layer>& layers, const Style& style,
                                    const std::filesystem::path& path);
void write_image(const Image& image, const std::filesystem::path& path);

/// One output panel of a preset figure.
struct Panel {
    std::string name;
    std::vector<Layer> layers;
    std::string caption;
};

struct Fig1Inputs {
    const MixtureSpec* spec = nullptr;
    int label = 0;
    /// Ground truth, unguided, CFG, naive truncation, autoguidance.
    std::array<Points, 5> populations;
    double contour_mass = 0.99;
};
std::vector<Panel> fig1_panels(const Fig1Inputs& in, const Style& style);

struct Fig2Inputs {
    const MixtureSpec* spec = nullptr;
    int label = 0;
    DenoiserPtr main;         // conditional
    DenoiserPtr guide;        // guiding model as used by the sampler
    ClassLabel guide_label;   // nullopt for an unconditional guide
    double sigma_mid = 0.03;
    double weight = 4.0;
    std::size_t trajectories = 64;
    std::uint64_t seed = 0;
    double contour_mass = 0.99;
};
std::vector<Panel> fig2_panels(const Fig2Inputs& in, const Style& style);

inline constexpr std::array<double, 5> kFig9Sigmas = {0.5, 0.25, 0.08, 0.03, 0.01};

struct Fig9Inputs {
    const MixtureSpec* spec = nullptr;
    int label = 0;
    DenoiserPtr main;
    DenoiserPtr cfg_guide;    // unconditional
    DenoiserPtr auto_guide;   // conditional, inferior
    double contour_mass = 0.99;
};
std::vector<Panel> fig9_panels(const Fig9Inputs& in, const Style& style);

} // namespace aglab
