#include "aglab/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "aglab/guidance.hpp"
#include "aglab/metrics.hpp"
#include "aglab/sampler.hpp"

namespace aglab {

std::string to_string(FieldKind kind)
{
    switch (kind) {
    case FieldKind::density: return "density";
    case FieldKind::log_ratio: return "log_ratio";
    case FieldKind::score_field: return "score_field";
    }
    throw std::invalid_argument("bad field kind");
}

Vec2 FieldRaster::center(int col, int row) const
{
    return {extent.x0 + (col + 0.5) * cell_width(), extent.y0 + (row + 0.5) * cell_height()};
}

Points FieldRaster::centers() const
{
    Points p(2, static_cast<Eigen::Index>(width) * height);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            p.col(static_cast<Eigen::Index>(r) * width + c) = center(c, r);
        }
    }
    return p;
}

void FieldRaster::validate() const
{
    if (width < kMinRasterSide || height < kMinRasterSide) {
        throw std::invalid_argument("raster resolution must be at least 16x16");
    }
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (!values.empty() && values.size() != n) {
        throw std::invalid_argument("raster value count does not match resolution");
    }
    if (vectors.size() != 0 && static_cast<std::size_t>(vectors.cols()) != n) {
        throw std::invalid_argument("raster vector count does not match resolution");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite raster value");
        }
    }
    if (!vectors.allFinite()) {
        throw NumericError("non-finite raster vector");
    }
}

namespace {

FieldRaster blank(FieldKind kind, const Extent& extent, int width, int height)
{
    FieldRaster r;
    r.kind = kind;
    r.extent = extent;
    r.width = width;
    r.height = height;
    if (width < kMinRasterSide || height < kMinRasterSide) {
        throw std::invalid_argument("raster resolution must be at least 16x16");
    }
    return r;
}

void normalize_exp(std::vector<double>& log_values, double cell_area)
{
    const double top = *std::max_element(log_values.begin(), log_values.end());
    double total = 0.0;
    for (double& v : log_values) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : log_values) {
        v /= total * cell_area;
    }
}

} // namespace

FieldRaster raster_density(const MixtureSpec& spec, ClassLabel label, double sigma, const Extent& extent, int width,
                           int height)
{
    FieldRaster r = blank(FieldKind::density, extent, width, height);
    const MixtureOracle oracle(spec, label);
    const Points c = r.centers();
    r.values.resize(static_cast<std::size_t>(c.cols()));
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        r.values[static_cast<std::size_t>(j)] = oracle.density(c.col(j), sigma);
    }
    r.validate();
    return r;
}

FieldRaster raster_density(const Denoiser& model, ClassLabel label, double sigma, const Extent& extent, int width,
                           int height)
{
    if (!model.has_energy()) {
        throw std::invalid_argument("density raster needs an energy model");
    }
    FieldRaster r = blank(FieldKind::density, extent, width, height);
    const Eigen::RowVectorXd g = model.energy(r.centers(), sigma, label);
    r.values.assign(g.data(), g.data() + g.size());
    normalize_exp(r.values, r.cell_area());
    r.validate();
    return r;
}

FieldRaster raster_log_ratio(const Denoiser& main, ClassLabel main_label, const Denoiser& guide,
                             ClassLabel guide_label, double sigma, const Extent& extent, int width, int height)
{
    FieldRaster r = blank(FieldKind::log_ratio, extent, width, height);
    const bool with_value = main.has_energy() && guide.has_energy();
    const LogRatioField f = log_ratio_field(main, main_label, guide, guide_label, r.centers(), sigma, with_value);
    if (f.value) {
        // Shift so the mean is zero; the normalizing constants are unknown anyway.
        const double mean = f.value->mean();
        r.values.resize(static_cast<std::size_t>(f.value->size()));
        for (Eigen::Index j = 0; j < f.value->size(); ++j) {
            r.values[static_cast<std::size_t>(j)] = (*f.value)(j) - mean;
        }
    }
    r.vectors = f.gradient;
    r.validate();
    return r;
}

FieldRaster raster_score_field(const Denoiser& model, ClassLabel label, double sigma, const Extent& extent, int width,
                               int height)
{
    FieldRaster r = blank(FieldKind::score_field, extent, width, height);
    r.vectors = model.score(r.centers(), sigma, label);
    r.validate();
    return r;
}

double raster_entropy(const FieldRaster& raster)
{
    double total = 0.0;
    for (double v : raster.values) {
        total += v;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("entropy needs a positive raster");
    }
    double h = 0.0;
    for (double v : raster.values) {
        const double p = v / total;
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h;
}

std::vector<double> contour_levels(const FieldRaster& raster, const std::vector<double>& mass_fractions)
{
    if (raster.values.empty()) {
        throw std::invalid_argument("contour levels need scalar values");
    }
    std::vector<double> sorted = raster.values;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::vector<double> cumulative(sorted.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        acc += sorted[i];
        cumulative[i] = acc;
    }
    std::vector<double> levels;
    for (double f : mass_fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw std::invalid_argument("mass fraction must be in (0, 1]");
        }
        if (f == 1.0) {
            levels.push_back(sorted.back());
            continue;
        }
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), f * acc);
        const auto idx = std::min(static_cast<std::size_t>(it - cumulative.begin()), sorted.size() - 1);
        levels.push_back(sorted[idx]);
    }
    return levels;
}

// ---- composition ----

namespace {

void require_extent(const FieldRaster& r, const Style& style)
{
    if (!(r.extent == style.extent)) {
        throw std::invalid_argument("layer extent differs from figure extent");
    }
    r.validate();
}

// Nearest-cell lookup of a raster vector at world position p.
Vec2 vector_at(const FieldRaster& r, const Vec2& p)
{
    const int c = std::clamp(static_cast<int>(std::floor((p.x() - r.extent.x0) / r.cell_width())), 0, r.width - 1);
    const int row = std::clamp(static_cast<int>(std::floor((p.y() - r.extent.y0) / r.cell_height())), 0, r.height - 1);
    return r.vectors.col(static_cast<Eigen::Index>(row) * r.width + c);
}

} // namespace

PlotData compile_plot(const std::vector<Layer>& layers, const Style& style)
{
    if (style.width < 1 || style.height < 1 || style.quiver_grid < 1 || style.point_radius < 0) {
        throw std::invalid_argument("bad figure style");
    }
    PlotData plot;
    plot.style = style;
    const Extent& e = style.extent;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Layer& layer = layers[li];
        const int id = static_cast<int>(li);
        plot.colors.push_back(layer.color);
        if (layer.heat) {
            require_extent(*layer.heat, style);
            if (layer.heat->values.empty()) {
                throw std::invalid_argument("heat layer needs scalar values");
            }
            plot.heats.push_back({id, layer.heat->width, layer.heat->height, layer.heat_scale, layer.heat->values});
        }
        if (!layer.contour_levels.empty()) {
            const FieldRaster* field = layer.contour_field ? &*layer.contour_field : (layer.heat ? &*layer.heat : nullptr);
            if (field == nullptr || field->values.empty()) {
                throw std::invalid_argument("contour levels given without a scalar field");
            }
            require_extent(*field, style);
            plot.contours.push_back({id, field->width, field->height, field->values, layer.contour_levels});
        }
        for (Eigen::Index j = 0; j < layer.scatter.cols(); ++j) {
            plot.points.push_back({id, -1, layer.scatter(0, j), layer.scatter(1, j), 0.0, 0.0});
        }
        if (layer.vectors) {
            require_extent(*layer.vectors, style);
            if (layer.vectors->vectors.size() == 0) {
                throw std::invalid_argument("vector layer needs vectors");
            }
            // Regular quiver grid; longest arrow spans 0.8 grid steps.
            const int g = style.quiver_grid;
            const double sx = (e.x1 - e.x0) / g;
            const double sy = (e.y1 - e.y0) / g;
            std::vector<Vec2> base, vec;
            double longest = 0.0;
            for (int r = 0; r < g; ++r) {
                for (int c = 0; c < g; ++c) {
                    const Vec2 p(e.x0 + (c + 0.5) * sx, e.y0 + (r + 0.5) * sy);
                    base.push_back(p);
                    vec.push_back(vector_at(*layer.vectors, p));
                    longest = std::max(longest, vec.back().norm());
                }
            }
            const double scale = longest > 0.0 ? 0.8 * std::min(sx, sy) / longest : 0.0;
            for (std::size_t k = 0; k < base.size(); ++k) {
                plot.arrows.push_back({id, -1, base[k].x(), base[k].y(), scale * vec[k].x(), scale * vec[k].y()});
            }
        }
        for (std::size_t t = 0; t < layer.trajectories.size(); ++t) {
            const Points& path = layer.trajectories[t];
            for (Eigen::Index j = 0; j < path.cols(); ++j) {
                plot.paths.push_back({id, static_cast<int>(t), path(0, j), path(1, j), 0.0, 0.0});
            }
        }
    }
    return plot;
}

// ---- rasterization ----

namespace {

class Canvas {
public:
    explicit Canvas(const Style& style) : style_(style), img_{style.width, style.height, {}}
    {
        img_.rgb.resize(static_cast<std::size_t>(style.width) * static_cast<std::size_t>(style.height) * 3);
        for (std::size_t i = 0; i < img_.rgb.size(); i += 3) {
            img_.rgb[i] = style.background[0];
            img_.rgb[i + 1] = style.background[1];
            img_.rgb[i + 2] = style.background[2];
        }
    }

    // Pixel coordinates of a world point (continuous, y flipped).
    double px(double x) const { return (x - style_.extent.x0) / (style_.extent.x1 - style_.extent.x0) * style_.width; }
    double py(double y) const { return (style_.extent.y1 - y) / (style_.extent.y1 - style_.extent.y0) * style_.height; }
    Vec2 world(int i, int j) const
    {
        const Extent& e = style_.extent;
        return {e.x0 + (i + 0.5) / style_.width * (e.x1 - e.x0), e.y1 - (j + 0.5) / style_.height * (e.y1 - e.y0)};
    }

    void blend(int i, int j, const Rgb& c, double t)
    {
        if (i < 0 || j < 0 || i >= img_.width || j >= img_.height) {
            return;
        }
        const std::size_t k = (static_cast<std::size_t>(j) * static_cast<std::size_t>(img_.width) + static_cast<std::size_t>(i)) * 3;
        for (int ch = 0; ch < 3; ++ch) {
            const double v = (1.0 - t) * img_.rgb[k + static_cast<std::size_t>(ch)] + t * c[static_cast<std::size_t>(ch)];
            img_.rgb[k + static_cast<std::size_t>(ch)] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    void set(int i, int j, const Rgb& c) { blend(i, j, c, 1.0); }

    void dot(double x, double y, int radius, const Rgb& c)
    {
        const int ci = static_cast<int>(std::floor(px(x)));
        const int cj = static_cast<int>(std::floor(py(y)));
        for (int dj = -radius; dj <= radius; ++dj) {
            for (int di = -radius; di <= radius; ++di) {
                if (di * di + dj * dj <= radius * radius) {
                    set(ci + di, cj + dj, c);
                }
            }
        }
    }

    void line(double xa, double ya, double xb, double yb, const Rgb& c)
    {
        int i0 = static_cast<int>(std::floor(px(xa))), j0 = static_cast<int>(std::floor(py(ya)));
        const int i1 = static_cast<int>(std::floor(px(xb))), j1 = static_cast<int>(std::floor(py(yb)));
        // Skip segments wildly outside the canvas (divergent trajectories).
        const int lim = 4 * std::max(img_.width, img_.height);
        if (std::abs(i0) > lim || std::abs(j0) > lim || std::abs(i1) > lim || std::abs(j1) > lim) {
            return;
        }
        const int di = std::abs(i1 - i0), dj = -std::abs(j1 - j0);
        const int si = i0 < i1 ? 1 : -1, sj = j0 < j1 ? 1 : -1;
        int err = di + dj;
        while (true) {
            set(i0, j0, c);
            if (i0 == i1 && j0 == j1) {
                break;
            }
            const int e2 = 2 * err;
            if (e2 >= dj) {
                err += dj;
                i0 += si;
            }
            if (e2 <= di) {
                err += di;
                j0 += sj;
            }
        }
    }

    const Style& style() const { return style_; }
    Image take() { return std::move(img_); }

private:
    Style style_;
    Image img_;
};

Rgb darker(const Rgb& c)
{
    return {static_cast<std::uint8_t>(c[0] * 6 / 10), static_cast<std::uint8_t>(c[1] * 6 / 10),
            static_cast<std::uint8_t>(c[2] * 6 / 10)};
}

constexpr Rgb kNegative{40, 90, 230};

double bilinear(const std::vector<double>& v, int w, int h, const Extent& e, const Vec2& p)
{
    const double fx = (p.x() - e.x0) / (e.x1 - e.x0) * w - 0.5;
    const double fy = (p.y() - e.y0) / (e.y1 - e.y0) * h - 0.5;
    const double cx = std::clamp(fx, 0.0, w - 1.0);
    const double cy = std::clamp(fy, 0.0, h - 1.0);
    const int i = std::min(static_cast<int>(cx), w - 2);
    const int j = std::min(static_cast<int>(cy), h - 2);
    const double tx = cx - i, ty = cy - j;
    auto at = [&](int a, int b) { return v[static_cast<std::size_t>(b) * static_cast<std::size_t>(w) + static_cast<std::size_t>(a)]; };
    return (1 - ty) * ((1 - tx) * at(i, j) + tx * at(i + 1, j)) + ty * ((1 - tx) * at(i, j + 1) + tx * at(i + 1, j + 1));
}

void draw_heat(Canvas& cv, const PlotData::Heat& h, const Rgb& color)
{
    double top = 0.0;
    for (double v : h.values) {
        top = std::max(top, h.scale == HeatScale::diverging ? std::abs(v) : v);
    }
    if (!(top > 0.0)) {
        return;
    }
    const Extent& e = cv.style().extent;
    const double cw = (e.x1 - e.x0) / h.width, ch = (e.y1 - e.y0) / h.height;
    for (int j = 0; j < cv.style().height; ++j) {
        for (int i = 0; i < cv.style().width; ++i) {
            const Vec2 p = cv.world(i, j);
            const int c = std::clamp(static_cast<int>(std::floor((p.x() - e.x0) / cw)), 0, h.width - 1);
            const int r = std::clamp(static_cast<int>(std::floor((p.y() - e.y0) / ch)), 0, h.height - 1);
            const double v = h.values[static_cast<std::size_t>(r) * static_cast<std::size_t>(h.width) + static_cast<std::size_t>(c)] / top;
            switch (h.scale) {
            case HeatScale::linear: cv.blend(i, j, color, std::max(v, 0.0)); break;
            case HeatScale::sqrt: cv.blend(i, j, color, std::sqrt(std::max(v, 0.0))); break;
            case HeatScale::log: cv.blend(i, j, color, v > 0.0 ? std::clamp(1.0 + std::log10(v) / 4.0, 0.0, 1.0) : 0.0); break;
            case HeatScale::diverging: cv.blend(i, j, v >= 0.0 ? color : kNegative, std::abs(v)); break;
            }
        }
    }
}

void draw_contour(Canvas& cv, const PlotData::Contour& ct, const Rgb& color)
{
    const int W = cv.style().width, H = cv.style().height;
    std::vector<double> field(static_cast<std::size_t>(W) * static_cast<std::size_t>(H));
    for (int j = 0; j < H; ++j) {
        for (int i = 0; i < W; ++i) {
            field[static_cast<std::size_t>(j) * static_cast<std::size_t>(W) + static_cast<std::size_t>(i)] =
                bilinear(ct.values, ct.width, ct.height, cv.style().extent, cv.world(i, j));
        }
    }
    const Rgb ink = darker(color);
    for (double level : ct.levels) {
        for (int j = 0; j < H; ++j) {
            for (int i = 0; i < W; ++i) {
                const bool in = field[static_cast<std::size_t>(j) * static_cast<std::size_t>(W) + static_cast<std::size_t>(i)] >= level;
                const bool right = i + 1 < W && (field[static_cast<std::size_t>(j) * static_cast<std::size_t>(W) + static_cast<std::size_t>(i + 1)] >= level) != in;
                const bool down = j + 1 < H && (field[static_cast<std::size_t>(j + 1) * static_cast<std::size_t>(W) + static_cast<std::size_t>(i)] >= level) != in;
                if (right || down) {
                    cv.set(i, j, ink);
                }
            }
        }
    }
}

} // namespace

Image draw_plot(const PlotData& plot)
{
    Canvas cv(plot.style);
    auto color = [&](int layer) { return plot.colors.at(static_cast<std::size_t>(layer)); };
    for (const auto& h : plot.heats) {
        draw_heat(cv, h, color(h.layer));
    }
    for (const auto& c : plot.contours) {
        draw_contour(cv, c, color(c.layer));
    }
    for (const auto& a : plot.arrows) {
        const Rgb ink = darker(color(a.layer));
        cv.line(a.x, a.y, a.x + a.u, a.y + a.v, ink);
        cv.dot(a.x + a.u, a.y + a.v, 1, ink);
    }
    for (std::size_t k = 0; k < plot.paths.size(); ++k) {
        const auto& m = plot.paths[k];
        if (k + 1 < plot.paths.size() && plot.paths[k + 1].layer == m.layer && plot.paths[k + 1].group == m.group) {
            cv.line(m.x, m.y, plot.paths[k + 1].x, plot.paths[k + 1].y, color(m.layer));
        } else {
            cv.dot(m.x, m.y, 1, darker(color(m.layer)));
        }
    }
    for (const auto& p : plot.points) {
        cv.dot(p.x, p.y, plot.style.point_radius, color(p.layer));
    }
    return cv.take();
}

std::string ppm_bytes(const Image& image)
{
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
    return out;
}

// ---- sidecar CSV ----

namespace {

void row(std::string& out, const char* record, int layer, int group, double a, double b = 0.0, double c = 0.0,
         double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g,%.17g,%.17g,%.17g\n", record, layer, group, a, b, c, d);
    out += buf;
}

} // namespace

std::string plot_csv(const PlotData& plot)
{
    const Style& s = plot.style;
    std::string out = "record,layer,group,a,b,c,d\n";
    row(out, "style", -1, -1, s.width, s.height, s.quiver_grid, s.point_radius);
    row(out, "extent", -1, -1, s.extent.x0, s.extent.y0, s.extent.x1, s.extent.y1);
    row(out, "background", -1, -1, s.background[0], s.background[1], s.background[2]);
    for (std::size_t l = 0; l < plot.colors.size(); ++l) {
        row(out, "color", static_cast<int>(l), -1, plot.colors[l][0], plot.colors[l][1], plot.colors[l][2]);
    }
    for (std::size_t k = 0; k < plot.heats.size(); ++k) {
        const auto& h = plot.heats[k];
        row(out, "heat", h.layer, static_cast<int>(k), h.width, h.height, static_cast<double>(h.scale));
        for (std::size_t i = 0; i < h.values.size(); ++i) {
            row(out, "heat_value", h.layer, static_cast<int>(k), static_cast<double>(i), h.values[i]);
        }
    }
    for (std::size_t k = 0; k < plot.contours.size(); ++k) {
        const auto& c = plot.contours[k];
        row(out, "contour", c.layer, static_cast<int>(k), c.width, c.height);
        for (double level : c.levels) {
            row(out, "contour_level", c.layer, static_cast<int>(k), level);
        }
        for (std::size_t i = 0; i < c.values.size(); ++i) {
            row(out, "contour_value", c.layer, static_cast<int>(k), static_cast<double>(i), c.values[i]);
        }
    }
    for (const auto& p : plot.points) {
        row(out, "point", p.layer, p.group, p.x, p.y);
    }
    for (const auto& a : plot.arrows) {
        row(out, "arrow", a.layer, a.group, a.x, a.y, a.u, a.v);
    }
    for (const auto& p : plot.paths) {
        row(out, "path", p.layer, p.group, p.x, p.y);
    }
    return out;
}

PlotData plot_from_csv(const std::string& text)
{
    PlotData plot;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line != "record,layer,group,a,b,c,d") {
        throw std::invalid_argument("not a plot sidecar");
    }
    auto to_u8 = [](double v) { return static_cast<std::uint8_t>(v); };
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string record, field;
        std::getline(ls, record, ',');
        std::array<double, 6> f{};
        for (double& v : f) {
            if (!std::getline(ls, field, ',')) {
                throw std::invalid_argument("short plot sidecar row: " + line);
            }
            v = std::strtod(field.c_str(), nullptr);
        }
        const int layer = static_cast<int>(f[0]);
        const int group = static_cast<int>(f[1]);
        const double a = f[2], b = f[3], c = f[4], d = f[5];
        if (record == "style") {
            plot.style.width = static_cast<int>(a);
            plot.style.height = static_cast<int>(b);
            plot.style.quiver_grid = static_cast<int>(c);
            plot.style.point_radius = static_cast<int>(d);
        } else if (record == "extent") {
            plot.style.extent = {a, b, c, d};
        } else if (record == "background") {
            plot.style.background = {to_u8(a), to_u8(b), to_u8(c)};
        } else if (record == "color") {
            plot.colors.push_back({to_u8(a), to_u8(b), to_u8(c)});
        } else if (record == "heat") {
            plot.heats.push_back({layer, static_cast<int>(a), static_cast<int>(b), static_cast<HeatScale>(static_cast<int>(c)), {}});
        } else if (record == "heat_value") {
            plot.heats.at(static_cast<std::size_t>(group)).values.push_back(b);
        } else if (record == "contour") {
            plot.contours.push_back({layer, static_cast<int>(a), static_cast<int>(b), {}, {}});
        } else if (record == "contour_level") {
            plot.contours.at(static_cast<std::size_t>(group)).levels.push_back(a);
        } else if (record == "contour_value") {
            plot.contours.at(static_cast<std::size_t>(group)).values.push_back(b);
        } else if (record == "point") {
            plot.points.push_back({layer, group, a, b, c, d});
        } else if (record == "arrow") {
            plot.arrows.push_back({layer, group, a, b, c, d});
        } else if (record == "path") {
            plot.paths.push_back({layer, group, a, b, c, d});
        } else {
            throw std::invalid_argument("unknown plot record: " + record);
        }
    }
    return plot;
}

void write_image(const Image& image, const std::filesystem::path& path)
{
    const std::string bytes = ppm_bytes(image);
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
        throw IoError("cannot write " + path.string());
    }
}

std::filesystem::path render_figure(const std::vector<Layer>& layers, const Style& style,
                                    const std::filesystem::path& path)
{
    const PlotData plot = compile_plot(layers, style);
    write_image(draw_plot(plot), path);
    std::filesystem::path csv = path;
    csv.replace_extension(".csv");
    std::ofstream out(csv, std::ios::binary);
    const std::string text = plot_csv(plot);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw IoError("cannot write " + csv.string());
    }
    return csv;
}

// ---- presets ----

namespace {

constexpr int kPresetRaster = 128;
constexpr Rgb kTruthColor{235, 130, 30};
constexpr Rgb kMainColor{40, 160, 70};
constexpr Rgb kGuideColor{210, 50, 50};
constexpr Rgb kRatioColor{40, 90, 230};
constexpr Rgb kSampleColor{20, 20, 20};

// Cell-averaged ground-truth density; point sampling would alias the thin branches.
FieldRaster truth_raster(const MixtureSpec& spec, int label, double sigma, const Extent& e)
{
    FieldRaster r = blank(FieldKind::density, e, kPresetRaster, kPresetRaster);
    std::vector<MixtureComponent> comps = spec.classes.at(static_cast<std::size_t>(label));
    for (auto& c : comps) {
        c.covariance += sigma * sigma * Mat2::Identity();
    }
    r.values = integrate_cells(comps, e.x0, e.y0, e.x1, e.y1, r.width, r.height, false);
    for (double& v : r.values) {
        v /= r.cell_area();
    }
    return r;
}

Layer truth_contours(const FieldRaster& truth, double mass)
{
    Layer l;
    l.contour_field = truth;
    l.contour_levels = contour_levels(truth, {mass});
    l.color = kTruthColor;
    return l;
}

Layer model_density(const Denoiser& model, ClassLabel label, double sigma, const Extent& e, const Rgb& color)
{
    Layer l;
    l.heat = raster_density(model, label, sigma, e, kPresetRaster, kPresetRaster);
    l.heat_scale = HeatScale::sqrt;
    l.color = color;
    return l;
}

Layer ratio_layer(const Denoiser& main, int label, const Denoiser& guide, ClassLabel guide_label, double sigma,
                  const Extent& e)
{
    FieldRaster r = raster_log_ratio(main, label, guide, guide_label, sigma, e, kPresetRaster, kPresetRaster);
    Layer l;
    if (!r.values.empty()) {
        FieldRaster heat = r;
        heat.vectors.resize(2, 0);
        l.heat = std::move(heat);
        l.heat_scale = HeatScale::diverging;
    }
    l.vectors = std::move(r);
    l.color = kGuideColor;
    return l;
}

} // namespace

std::vector<Panel> fig1_panels(const Fig1Inputs& in, const Style& style)
{
    if (in.spec == nullptr) {
        throw std::invalid_argument("figure needs a mixture");
    }
    static const std::array<const char*, 5> names = {"a_ground_truth", "b_unguided", "c_cfg", "d_truncation",
                                                     "e_autoguidance"};
    static const std::array<const char*, 5> captions = {
        "ground truth samples with the 99% mass contour",
        "unguided main model",
        "classifier-free guidance, unconditional guide",
        "naive truncation of the main model's score",
        "autoguidance by a smaller, less trained model"};
    const FieldRaster truth = truth_raster(*in.spec, in.label, 0.0, style.extent);
    std::vector<Panel> panels;
    for (std::size_t k = 0; k < 5; ++k) {
        Layer heat;
        heat.heat = truth;
        heat.heat_scale = HeatScale::log;
        heat.color = kTruthColor;
        Layer dots;
        dots.scatter = in.populations[k];
        dots.color = kSampleColor;
        panels.push_back({names[k], {heat, truth_contours(truth, in.contour_mass), dots}, captions[k]});
    }
    return panels;
}

std::vector<Panel> fig2_panels(const Fig2Inputs& in, const Style& style)
{
    if (in.spec == nullptr || !in.main || !in.guide) {
        throw std::invalid_argument("figure needs a mixture and two models");
    }
    const Extent& e = style.extent;
    const double s = in.sigma_mid;
    const FieldRaster truth_mid = truth_raster(*in.spec, in.label, s, e);
    const FieldRaster truth_clean = truth_raster(*in.spec, in.label, 0.0, e);
    std::vector<Panel> panels;

    Layer main_d = model_density(*in.main, in.label, s, e, kMainColor);
    main_d.vectors = raster_score_field(*in.main, in.label, s, e, kPresetRaster, kPresetRaster);
    panels.push_back({"a_main_density", {main_d, truth_contours(truth_mid, in.contour_mass)},
                      "main model density at sigma_mid (grid-normalized) and its score field"});

    Layer guide_d = model_density(*in.guide, in.guide_label, s, e, kGuideColor);
    guide_d.vectors = raster_score_field(*in.guide, in.guide_label, s, e, kPresetRaster, kPresetRaster);
    panels.push_back({"b_guide_density", {guide_d, truth_contours(truth_mid, in.contour_mass)},
                      "guiding model density at sigma_mid (grid-normalized) and its score field"});

    Layer ratio = ratio_layer(*in.main, in.label, *in.guide, in.guide_label, s, e);
    ratio.color = kRatioColor;
    panels.push_back({"c_ratio", {ratio, truth_contours(truth_mid, in.contour_mass)},
                      "log density ratio main / guide and its gradient"});

    // Trajectories from sigma_mid to zero, started from the noisy ground truth.
    const SigmaSchedule sched = build_schedule(16, 0.002, s, 7.0);
    const MixtureOracle oracle(*in.spec, in.label);
    Rng rng(stream_key(in.seed, 0x66696732ULL));
    const Points starts = oracle.sample(in.trajectories, s, rng);
    GuidanceSpec gs;
    gs.mode = in.guide_label ? GuidanceMode::autoguidance : GuidanceMode::cfg;
    gs.main = in.main;
    gs.guides = {in.guide};
    for (const double w : {1.0, in.weight}) {
        gs.weight = w;
        const GuidedDenoiser guided(gs);
        std::vector<TrajectoryRecord> records;
        heun_sample_batch(guided, sched, in.label, starts, {}, &records);
        Layer paths;
        paths.color = w == 1.0 ? kMainColor : kRatioColor;
        for (const auto& rec : records) {
            Points p(2, static_cast<Eigen::Index>(rec.steps.size()));
            for (std::size_t k = 0; k < rec.steps.size(); ++k) {
                p.col(static_cast<Eigen::Index>(k)) = rec.steps[k].x;
            }
            paths.trajectories.push_back(std::move(p));
        }
        if (w == 1.0) {
            panels.push_back({"d_unguided_trajectories", {truth_contours(truth_clean, in.contour_mass), paths},
                              "unguided trajectories from sigma_mid to 0"});
        } else {
            panels.push_back({"e_guided_trajectories", {truth_contours(truth_clean, in.contour_mass), paths},
                              "guided trajectories from sigma_mid to 0"});
        }
    }
    return panels;
}

std::vector<Panel> fig9_panels(const Fig9Inputs& in, const Style& style)
{
    if (in.spec == nullptr || !in.main || !in.cfg_guide || !in.auto_guide) {
        throw std::invalid_argument("figure needs a mixture and three models");
    }
    const Extent& e = style.extent;
    std::vector<Panel> panels;
    for (std::size_t row = 0; row < kFig9Sigmas.size(); ++row) {
        const double s = kFig9Sigmas[row];
        const Layer contours = truth_contours(truth_raster(*in.spec, in.label, s, e), in.contour_mass);
        const std::string prefix = "s" + std::to_string(row) + "_";
        char sig[32];
        std::snprintf(sig, sizeof sig, "sigma=%g", s);
        panels.push_back({prefix + "a_main", {model_density(*in.main, in.label, s, e, kMainColor), contours},
                          std::string(sig) + ": main model density (grid-normalized)"});
        panels.push_back({prefix + "b_cfg_guide",
                          {model_density(*in.cfg_guide, std::nullopt, s, e, kGuideColor), contours},
                          std::string(sig) + ": unconditional guide density (grid-normalized)"});
        panels.push_back({prefix + "c_auto_guide",
                          {model_density(*in.auto_guide, in.label, s, e, kGuideColor), contours},
                          std::string(sig) + ": conditional inferior guide density (grid-normalized)"});
        panels.push_back({prefix + "d_cfg_ratio",
                          {ratio_layer(*in.main, in.label, *in.cfg_guide, std::nullopt, s, e), contours},
                          std::string(sig) + ": log ratio main / unconditional guide"});
        panels.push_back({prefix + "e_auto_ratio",
                          {ratio_layer(*in.main, in.label, *in.auto_guide, in.label, s, e), contours},
                          std::string(sig) + ": log ratio main / inferior guide"});
    }
    return panels;
}

} // namespace aglab
