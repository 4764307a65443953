#include "aglab/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "aglab/parallel.hpp"
#include "aglab/rng.hpp"

namespace aglab {

SigmaSchedule build_schedule(int n_steps, double sigma_min, double sigma_max, double rho)
{
    if (n_steps < 2) {
        throw std::invalid_argument("schedule needs at least 2 steps");
    }
    if (!(sigma_min > 0.0 && sigma_min < sigma_max)) {
        throw std::invalid_argument("schedule needs 0 < sigma_min < sigma_max");
    }
    if (!(rho >= 1.0)) {
        throw std::invalid_argument("schedule needs rho >= 1");
    }
    SigmaSchedule s{n_steps, sigma_min, sigma_max, rho, {}};
    const double a = std::pow(sigma_max, 1.0 / rho);
    const double b = std::pow(sigma_min, 1.0 / rho);
    s.ladder.resize(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n_steps - 1);
        s.ladder[static_cast<std::size_t>(i)] = std::pow(a + t * (b - a), rho);
    }
    // Pin the endpoints exactly; pow round-trips can be off by an ulp.
    s.ladder.front() = sigma_max;
    s.ladder[static_cast<std::size_t>(n_steps) - 1] = sigma_min;
    s.ladder.back() = 0.0;
    return s;
}

namespace {

void check_finite(const Points& x, int step)
{
    if (!x.allFinite()) {
        throw NumericError("non-finite sampler state at step " + std::to_string(step));
    }
}

} // namespace

Points heun_sample_batch(const Denoiser& denoiser, const SigmaSchedule& schedule, ClassLabel label,
                         const Points& x_init, std::span<const std::uint64_t> ids,
                         std::vector<TrajectoryRecord>* records)
{
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(x_init.cols())) {
        throw std::invalid_argument("sample id count does not match batch size");
    }
    check_finite(x_init, 0);
    const Eigen::Index B = x_init.cols();
    if (records != nullptr) {
        records->assign(static_cast<std::size_t>(B), TrajectoryRecord{});
        for (Eigen::Index j = 0; j < B; ++j) {
            (*records)[static_cast<std::size_t>(j)].sample_id =
                ids.empty() ? static_cast<std::uint64_t>(j) : ids[static_cast<std::size_t>(j)];
        }
    }

    Points x = x_init;
    const int N = schedule.n_steps;
    for (int i = 0; i < N; ++i) {
        const double s_cur = schedule.ladder[static_cast<std::size_t>(i)];
        const double s_next = schedule.ladder[static_cast<std::size_t>(i) + 1];
        const EvalContext ctx1{stream_key(0x6865756eULL, i, 0), ids};
        const Points den = denoiser.denoise(x, s_cur, label, ctx1);
        const Points d = (x - den) / s_cur;
        if (records != nullptr) {
            for (Eigen::Index j = 0; j < B; ++j) {
                (*records)[static_cast<std::size_t>(j)].steps.push_back({s_cur, x.col(j), den.col(j), d.col(j)});
            }
        }
        const Points x_euler = x + (s_next - s_cur) * d;
        if (s_next > 0.0) {
            const EvalContext ctx2{stream_key(0x6865756eULL, i, 1), ids};
            const Points den2 = denoiser.denoise(x_euler, s_next, label, ctx2);
            const Points d2 = (x_euler - den2) / s_next;
            x = x + (s_next - s_cur) * (0.5 * (d + d2));
        } else {
            x = x_euler;
        }
        check_finite(x, i + 1);
    }
    if (records != nullptr) {
        for (Eigen::Index j = 0; j < B; ++j) {
            (*records)[static_cast<std::size_t>(j)].steps.push_back({0.0, x.col(j), x.col(j), Vec2::Zero()});
        }
    }
    return x;
}

Vec2 heun_sample(const Denoiser& denoiser, const SigmaSchedule& schedule, ClassLabel label, const Vec2& x_init,
                 TrajectoryRecord* record)
{
    const Points x0 = x_init;
    if (record == nullptr) {
        return heun_sample_batch(denoiser, schedule, label, x0).col(0);
    }
    std::vector<TrajectoryRecord> recs;
    const Points out = heun_sample_batch(denoiser, schedule, label, x0, {}, &recs);
    *record = std::move(recs.front());
    return out.col(0);
}

Vec2 initial_point(const SigmaSchedule& schedule, std::uint64_t seed, std::uint64_t id)
{
    Rng rng(stream_key(seed, 0x696e6974ULL, id));
    const double z1 = standard_normal(rng);
    const double z2 = standard_normal(rng);
    return schedule.sigma_max * Vec2(z1, z2);
}

Points sample_population(const Denoiser& denoiser, const SigmaSchedule& schedule, ClassLabel label,
                         std::size_t count, std::uint64_t seed, std::uint64_t first_id)
{
    Points out(2, static_cast<Eigen::Index>(count));
    const std::size_t chunks = (count + kPopulationChunk - 1) / kPopulationChunk;
    parallel_for(chunks, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            const std::size_t lo = c * kPopulationChunk;
            const std::size_t hi = std::min(count, lo + kPopulationChunk);
            std::vector<std::uint64_t> ids(hi - lo);
            std::iota(ids.begin(), ids.end(), first_id + lo);
            Points x0(2, static_cast<Eigen::Index>(hi - lo));
            for (std::size_t k = 0; k < ids.size(); ++k) {
                x0.col(static_cast<Eigen::Index>(k)) = initial_point(schedule, seed, ids[k]);
            }
            out.middleCols(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)) =
                heun_sample_batch(denoiser, schedule, label, x0, ids);
        }
    });
    return out;
}

std::string population_csv(const Points& population, ClassLabel label, std::uint64_t first_id)
{
    std::string out = "sample_id,class,x,y\n";
    char line[160];
    for (Eigen::Index j = 0; j < population.cols(); ++j) {
        std::snprintf(line, sizeof line, "%llu,%d,%.17g,%.17g\n",
                      static_cast<unsigned long long>(first_id + static_cast<std::uint64_t>(j)), label ? *label : -1,
                      population(0, j), population(1, j));
        out += line;
    }
    return out;
}

Points population_from_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::vector<Vec2> pts;
    if (!std::getline(in, line) || line != "sample_id,class,x,y") {
        throw IoError("population CSV lacks the sample_id,class,x,y header");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        unsigned long long id = 0;
        int cls = 0;
        double x = 0.0, y = 0.0;
        if (std::sscanf(line.c_str(), "%llu,%d,%lf,%lf", &id, &cls, &x, &y) != 4) {
            throw IoError("malformed population CSV line: " + line);
        }
        pts.emplace_back(x, y);
    }
    Points out(2, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = pts[k];
    }
    return out;
}

std::string trajectories_csv(const std::vector<TrajectoryRecord>& records)
{
    std::string out = "sample_id,step,sigma,x,y\n";
    char line[192];
    for (const auto& r : records) {
        for (std::size_t i = 0; i < r.steps.size(); ++i) {
            const auto& s = r.steps[i];
            std::snprintf(line, sizeof line, "%llu,%zu,%.17g,%.17g,%.17g\n",
                          static_cast<unsigned long long>(r.sample_id), i, s.sigma, s.x.x(), s.x.y());
            out += line;
        }
    }
    return out;
}

} // namespace aglab
