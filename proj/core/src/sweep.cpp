#include "aglab/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "aglab/parallel.hpp"
#include "aglab/rng.hpp"

namespace aglab {

SweepAxis guidance_weight_axis()
{
    SweepAxis axis{"w", {}};
    for (int k = 0; k <= 50; ++k) {
        axis.values.push_back(1.0 + 0.05 * k);
    }
    return axis;
}

SweepAxis ema_axis(const std::string& name)
{
    return {name, {0.005, 0.010, 0.025, 0.050}};
}

std::string to_string(SweepPhase phase)
{
    switch (phase) {
    case SweepPhase::search: return "search";
    case SweepPhase::refine: return "refine";
    case SweepPhase::done: return "done";
    }
    throw std::invalid_argument("bad sweep phase");
}

namespace {

SweepPhase phase_from_string(const std::string& s)
{
    if (s == "search") {
        return SweepPhase::search;
    }
    if (s == "refine") {
        return SweepPhase::refine;
    }
    if (s == "done") {
        return SweepPhase::done;
    }
    throw std::invalid_argument("unknown sweep phase: " + s);
}

// Incumbent plus its box neighborhood, clipped to the grid, in lexicographic order.
std::vector<SweepTuple> neighborhood(const SweepState& s)
{
    std::vector<SweepTuple> out{{}};
    for (std::size_t a = 0; a < s.axes.size(); ++a) {
        const int n = static_cast<int>(s.axes[a].values.size());
        const int lo = std::max(0, s.incumbent[a] - s.radius);
        const int hi = std::min(n - 1, s.incumbent[a] + s.radius);
        std::vector<SweepTuple> next;
        for (const auto& prefix : out) {
            for (int i = lo; i <= hi; ++i) {
                SweepTuple t = prefix;
                t.push_back(i);
                next.push_back(std::move(t));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::size_t repeats_of(const SweepState& s, const SweepTuple& t)
{
    const auto it = s.evaluated.find(t);
    return it == s.evaluated.end() ? 0 : it->second.repeats.size();
}

double value_of(const SweepState& s, const SweepTuple& t)
{
    return s.evaluated.at(t).best();
}

std::uint64_t flat_index(const SweepState& s, const SweepTuple& t)
{
    std::uint64_t idx = 0;
    for (std::size_t a = 0; a < s.axes.size(); ++a) {
        idx = idx * s.axes[a].values.size() + static_cast<std::uint64_t>(t[a]);
    }
    return idx;
}

struct Job {
    SweepTuple tuple;
    std::size_t repeat;
};

void evaluate(SweepState& s, std::vector<Job> jobs, const SweepObjective& objective)
{
    const auto left = static_cast<std::size_t>(std::max<std::int64_t>(s.budget - s.used, 0));
    if (jobs.size() > left) {
        jobs.resize(left);
    }
    std::vector<double> results(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const std::uint64_t seed = stream_key(s.seed, flat_index(s, jobs[j].tuple), jobs[j].repeat);
            results[j] = objective(s.values(jobs[j].tuple), seed);
        }
    });
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (!std::isfinite(results[j])) {
            throw std::runtime_error("sweep objective returned a non-finite value");
        }
        s.evaluated[jobs[j].tuple].repeats.push_back(results[j]);
        ++s.used;
    }
}

// Jobs bringing every tuple of the neighborhood up to `target` repeats.
std::vector<Job> pending(const SweepState& s, std::size_t target)
{
    std::vector<Job> jobs;
    for (const auto& t : neighborhood(s)) {
        for (std::size_t r = repeats_of(s, t); r < target; ++r) {
            jobs.push_back({t, r});
        }
    }
    return jobs;
}

SweepTuple best_in_neighborhood(const SweepState& s)
{
    SweepTuple best = s.incumbent;
    for (const auto& t : neighborhood(s)) {
        if (value_of(s, t) < value_of(s, best)) {
            best = t;
        }
    }
    return best;
}

} // namespace

double SweepEntry::best() const
{
    if (repeats.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    return *std::min_element(repeats.begin(), repeats.end());
}

std::vector<double> SweepState::values(const SweepTuple& t) const
{
    std::vector<double> v(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) {
        v[a] = axes[a].values.at(static_cast<std::size_t>(t.at(a)));
    }
    return v;
}

SweepTuple SweepState::best_tuple() const
{
    if (evaluated.empty()) {
        return incumbent;
    }
    auto best = evaluated.begin();
    for (auto it = evaluated.begin(); it != evaluated.end(); ++it) {
        if (it->second.best() < best->second.best()) {
            best = it;
        }
    }
    return best->first;
}

double SweepState::best_value() const
{
    const auto it = evaluated.find(best_tuple());
    return it == evaluated.end() ? std::numeric_limits<double>::infinity() : it->second.best();
}

SweepState make_sweep(std::vector<SweepAxis> axes, std::int64_t budget, std::uint64_t seed, SweepTuple start,
                      int k_repeats, int radius)
{
    if (axes.empty()) {
        throw std::invalid_argument("sweep needs at least one axis");
    }
    for (const auto& a : axes) {
        if (a.values.empty()) {
            throw std::invalid_argument("sweep axis '" + a.name + "' is empty");
        }
    }
    if (k_repeats < 1 || radius < 1 || budget < 0) {
        throw std::invalid_argument("sweep needs k_repeats >= 1, radius >= 1 and budget >= 0");
    }
    if (start.empty()) {
        for (const auto& a : axes) {
            start.push_back(static_cast<int>(a.values.size() / 2));
        }
    }
    if (start.size() != axes.size()) {
        throw std::invalid_argument("start tuple does not match axes");
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
        if (start[a] < 0 || start[a] >= static_cast<int>(axes[a].values.size())) {
            throw std::invalid_argument("start tuple out of range");
        }
    }
    SweepState s;
    s.axes = std::move(axes);
    s.incumbent = std::move(start);
    s.budget = budget;
    s.seed = seed;
    s.k_repeats = k_repeats;
    s.radius = radius;
    return s;
}

void run_sweep(SweepState& s, const SweepObjective& objective)
{
    while (s.phase != SweepPhase::done && !s.exhausted()) {
        if (s.phase == SweepPhase::search) {
            auto jobs = pending(s, 1);
            if (!jobs.empty()) {
                evaluate(s, std::move(jobs), objective);
                continue;
            }
            const SweepTuple next = best_in_neighborhood(s);
            if (next != s.incumbent) {
                s.incumbent = next;
            } else {
                s.phase = SweepPhase::refine;
            }
        } else {
            auto jobs = pending(s, static_cast<std::size_t>(s.k_repeats));
            if (!jobs.empty()) {
                evaluate(s, std::move(jobs), objective);
                continue;
            }
            const SweepTuple next = best_in_neighborhood(s);
            if (next != s.incumbent) {
                s.incumbent = next;
                s.phase = SweepPhase::search;
            } else {
                s.phase = SweepPhase::done;
            }
        }
    }
}

std::string sweep_state_json(const SweepState& s)
{
    nlohmann::json axes = nlohmann::json::array();
    for (const auto& a : s.axes) {
        axes.push_back({{"name", a.name}, {"values", a.values}});
    }
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& [t, e] : s.evaluated) {
        evals.push_back({{"tuple", t}, {"values", s.values(t)}, {"repeats", e.repeats}, {"best", e.best()}});
    }
    nlohmann::json j = {{"format", "aglab-sweep"},
                        {"axes", axes},
                        {"incumbent", s.incumbent},
                        {"radius", s.radius},
                        {"k_repeats", s.k_repeats},
                        {"budget", s.budget},
                        {"used", s.used},
                        {"seed", s.seed},
                        {"phase", to_string(s.phase)},
                        {"evaluated", evals}};
    if (!s.evaluated.empty()) {
        j["best"] = {{"tuple", s.best_tuple()}, {"values", s.values(s.best_tuple())}, {"value", s.best_value()}};
    }
    return j.dump(2);
}

SweepState sweep_state_from_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "aglab-sweep") {
        throw std::invalid_argument("not a sweep state file");
    }
    std::vector<SweepAxis> axes;
    for (const auto& a : j.at("axes")) {
        axes.push_back({a.at("name").get<std::string>(), a.at("values").get<std::vector<double>>()});
    }
    SweepState s = make_sweep(std::move(axes), j.at("budget").get<std::int64_t>(), j.at("seed").get<std::uint64_t>(),
                              j.at("incumbent").get<SweepTuple>(), j.at("k_repeats").get<int>(),
                              j.at("radius").get<int>());
    s.used = j.at("used").get<std::int64_t>();
    s.phase = phase_from_string(j.at("phase").get<std::string>());
    for (const auto& e : j.at("evaluated")) {
        s.evaluated[e.at("tuple").get<SweepTuple>()].repeats = e.at("repeats").get<std::vector<double>>();
    }
    return s;
}

} // namespace aglab
