#include "aglab/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "aglab/degrade.hpp"
#include "aglab/parallel.hpp"
#include "aglab/pipeline.hpp"
#include "aglab/render.hpp"
#include "aglab/sweep.hpp"
#include "aglab/version.hpp"

namespace aglab::cli {

namespace fs = std::filesystem;
using namespace aglab::pipeline;

std::string version_string()
{
    return std::string("aglab ") + kVersion;
}

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Options every subcommand shares.
struct Common {
    std::string out;
    std::uint64_t seed = 0;
    int threads = 0;
};

struct Session {
    CLI::App& app;
    Common common;
    fs::path out_dir;
    std::ostream& log;
};

void add_common(CLI::App& app, Common& c)
{
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "Read key=value options from a file; command-line flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.add_option("--out", c.out, "Output directory (default: $AGLAB_OUTPUT_ROOT/<command> or ./aglab-out/<command>)");
    app.add_option("--seed", c.seed, "Global seed");
    app.add_option("--threads", c.threads, "Worker thread cap (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
}

fs::path resolve_out(const std::string& flag, const std::string& command)
{
    if (!flag.empty()) {
        return flag;
    }
    const char* root = std::getenv(kOutputRootEnv);
    return fs::path(root != nullptr && *root != '\0' ? root : "aglab-out") / command;
}

// Creates the output directory and records the resolved configuration.
fs::path prepare_output(CLI::App& app, const Common& c, const std::string& command)
{
    const fs::path dir = resolve_out(c.out, command);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string());
    }
    write_text(dir / "config.txt", "# aglab " + command + "\n" + app.config_to_str(true, false));
    write_text(dir / "VERSION", version_string() + "\n");
    return dir;
}

void apply_threads(int threads)
{
    const int hw = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    set_thread_cap(threads > 0 ? threads : hw);
}

// --- shared option groups ---

struct ScheduleOpts {
    int steps = 32;
    double sigma_min = 0.002;
    double sigma_max = 5.0;
    double rho = 7.0;

    void add(CLI::App& app)
    {
        app.add_option("--steps", steps, "Heun steps N");
        app.add_option("--sigma-min", sigma_min);
        app.add_option("--sigma-max", sigma_max);
        app.add_option("--rho", rho);
    }
    SigmaSchedule build() const { return build_schedule(steps, sigma_min, sigma_max, rho); }
};

struct GuidanceOpts {
    std::string mode = "none";
    double w = 1.0;
    double alpha = 0.5;
    double trunc_factor = kDefaultTruncationFactor;
    double interval_lo = -1.0;
    double interval_hi = -1.0;
    std::string guide, uncond;
    double guide_ema = 0.010;

    void add(CLI::App& app)
    {
        app.add_option("--mode", mode, "none, cfg, autoguidance, naive_truncation or multi");
        app.add_option("--w", w, "Guidance weight");
        app.add_option("--alpha", alpha, "multi: blend between CFG (0) and autoguidance (1)");
        app.add_option("--trunc-factor", trunc_factor, "naive_truncation score multiplier");
        app.add_option("--interval-lo", interval_lo, "Guide only for sigma in (lo, hi]; negative disables");
        app.add_option("--interval-hi", interval_hi);
        app.add_option("--guide", guide, "Inferior conditional checkpoint (autoguidance, multi)");
        app.add_option("--uncond", uncond, "Unconditional checkpoint (cfg, multi)");
        app.add_option("--guide-ema", guide_ema, "EMA length for guide checkpoints (<= 0: raw weights)");
    }

    GuidanceSpec build(DenoiserPtr main) const
    {
        GuidanceSpec gs;
        gs.mode = guidance_mode_from_string(mode);
        gs.weight = w;
        gs.blend_alpha = alpha;
        gs.truncation_factor = trunc_factor;
        gs.main = std::move(main);
        if (interval_lo >= 0.0 || interval_hi >= 0.0) {
            gs.interval = GuidanceInterval{std::max(interval_lo, 0.0), interval_hi};
        }
        auto need = [&](const std::string& path, const char* flag) -> DenoiserPtr {
            if (path.empty()) {
                throw UsageError(std::string("--mode ") + mode + " needs " + flag);
            }
            return std::make_shared<const ModelDenoiser>(pick(load_checkpoint(path), guide_ema));
        };
        switch (gs.mode) {
        case GuidanceMode::cfg: gs.guides = {need(uncond, "--uncond")}; break;
        case GuidanceMode::autoguidance: gs.guides = {need(guide, "--guide")}; break;
        case GuidanceMode::multi: gs.guides = {need(uncond, "--uncond"), need(guide, "--guide")}; break;
        default: break;
        }
        gs.validate();
        return gs;
    }
};

DataBundle data_from(const std::string& dir, std::uint64_t data_seed, std::size_t calibration)
{
    return dir.empty() ? make_data(data_seed, calibration) : load_data(dir);
}

// --- subcommands ---

using Runner = std::function<void()>;

Runner setup_make_data(CLI::App& app, Common& c, std::ostream& log)
{
    auto calibration = std::make_shared<std::size_t>(kThresholdSamples);
    app.add_option("--calibration-samples", *calibration, "Ground-truth draws for the outlier threshold");
    return [&app, &c, &log, calibration] {
        const fs::path dir = prepare_output(app, c, "make-data");
        const DataBundle d = make_data(c.seed, *calibration);
        save_data(d, dir);
        log << "wrote " << (dir / "mixture.json").string() << " (" << fractal::kComponentsPerClass << " components per class)\n";
    };
}

struct TrainOpts {
    std::string data;
    std::uint64_t data_seed = 0;
    int width = 64;
    int layers = 4;
    std::string head = "energy";
    bool unconditional = false;
    TrainConfig cfg;
    std::string loss = "exact_sm";
};

Runner setup_train(CLI::App& app, Common& c, std::ostream& log)
{
    auto o = std::make_shared<TrainOpts>();
    app.add_option("--data", o->data, "Directory written by make-data (default: build from --data-seed)");
    app.add_option("--data-seed", o->data_seed, "Mixture seed when --data is absent");
    app.add_option("--width", o->width, "Hidden width n");
    app.add_option("--layers", o->layers, "Hidden layers");
    app.add_option("--head", o->head, "energy or direct_score");
    app.add_flag("--unconditional", o->unconditional, "Drop the class input");
    app.add_option("--iterations", o->cfg.iterations);
    app.add_option("--batch", o->cfg.batch_size);
    app.add_option("--p-mean", o->cfg.p_mean);
    app.add_option("--p-std", o->cfg.p_std);
    app.add_option("--lr", o->cfg.alpha_ref, "Reference learning rate");
    app.add_option("--t-ref", o->cfg.t_ref, "Learning-rate decay start");
    app.add_option("--loss", o->loss, "exact_sm or denoising_sm");
    app.add_option("--ema", o->cfg.ema_sigma_rels, "EMA lengths to track")->delimiter(',');
    return [&app, &c, &log, o] {
        const fs::path dir = prepare_output(app, c, "train");
        const MixtureSpec spec = o->data.empty() ? build_fractal(o->data_seed) : load_mixture(fs::path(o->data) / "mixture.json");
        ModelRecipe r;
        r.arch.hidden_width = o->width;
        r.arch.hidden_layers = o->layers;
        r.arch.head = head_from_string(o->head);
        r.arch.class_count = o->unconditional ? 0 : kClassCount;
        r.train = o->cfg;
        r.train.loss_kind = loss_kind_from_string(o->loss);
        r.train.seed = c.seed;
        std::vector<LossRecord> curve;
        const Checkpoint ckpt = train_recipe(r, spec, [&](const std::string& s) { log << s << "\n"; }, &curve);
        save_checkpoint(ckpt, dir / "checkpoint.ckpt");
        write_text(dir / "loss.csv", loss_curve_csv(curve));
        log << "wrote " << (dir / "checkpoint.ckpt").string() << "\n";
    };
}

struct SampleOpts {
    std::string model;
    double ema = 0.010;
    int label = 0;
    std::size_t count = 10'000;
    std::uint64_t first_id = 0;
    std::size_t trajectories = 0;
    ScheduleOpts schedule;
    GuidanceOpts guidance;
};

Runner setup_sample(CLI::App& app, Common& c, std::ostream& log)
{
    auto o = std::make_shared<SampleOpts>();
    app.add_option("--model", o->model, "Main checkpoint")->required();
    app.add_option("--ema", o->ema, "EMA length of the main model (<= 0: raw weights)");
    app.add_option("--class", o->label, "Class label")->check(CLI::Range(0, kClassCount - 1));
    app.add_option("--count", o->count, "Population size");
    app.add_option("--first-id", o->first_id, "Id of the first sample");
    app.add_option("--trajectories", o->trajectories, "Also record this many full trajectories");
    o->schedule.add(app);
    o->guidance.add(app);
    return [&app, &c, &log, o] {
        const auto main = std::make_shared<const ModelDenoiser>(pick(load_checkpoint(o->model), o->ema));
        const GuidedDenoiser d(o->guidance.build(main));
        const SigmaSchedule sched = o->schedule.build();
        const fs::path dir = prepare_output(app, c, "sample");
        const Points pop = sample_population(d, sched, o->label, o->count, c.seed, o->first_id);
        write_text(dir / "population.csv", population_csv(pop, o->label, o->first_id));
        if (o->trajectories > 0) {
            const std::size_t k = std::min(o->trajectories, o->count);
            Points init(2, static_cast<Eigen::Index>(k));
            std::vector<std::uint64_t> ids(k);
            for (std::size_t j = 0; j < k; ++j) {
                ids[j] = o->first_id + j;
                init.col(static_cast<Eigen::Index>(j)) = initial_point(sched, c.seed, ids[j]);
            }
            std::vector<TrajectoryRecord> records;
            heun_sample_batch(d, sched, o->label, init, ids, &records);
            write_text(dir / "trajectories.csv", trajectories_csv(records));
        }
        nlohmann::json meta = {{"nfe", sched.nfe()}, {"count", o->count}, {"class", o->label}};
        write_text(dir / "run.json", meta.dump(2) + "\n");
        log << "wrote " << (dir / "population.csv").string() << " (NFE " << sched.nfe() << ")\n";
    };
}

struct EvalOpts {
    std::string data;
    std::uint64_t data_seed = 0;
    std::size_t calibration = kThresholdSamples;
    std::string population;
    int label = 0;
};

Runner setup_eval(CLI::App& app, Common& c, std::ostream& log)
{
    auto o = std::make_shared<EvalOpts>();
    app.add_option("--data", o->data, "Directory written by make-data");
    app.add_option("--data-seed", o->data_seed, "Mixture seed when --data is absent");
    app.add_option("--calibration-samples", o->calibration);
    app.add_option("--population", o->population, "Population CSV")->required();
    app.add_option("--class", o->label)->check(CLI::Range(0, kClassCount - 1));
    return [&app, &c, &log, o] {
        const DataBundle d = data_from(o->data, o->data_seed, o->calibration);
        const Points pop = population_from_csv(read_text(o->population));
        const fs::path dir = prepare_output(app, c, "eval");
        const MetricContext ctx(d.spec, o->label, d.thresholds[static_cast<std::size_t>(o->label)]);
        const std::string json = metric_report_json(ctx.evaluate(pop, fs::path(o->population).filename().string()));
        write_text(dir / "metrics.json", json + "\n");
        log << json << "\n";
    };
}

struct SweepOpts {
    std::string data;
    std::uint64_t data_seed = 0;
    std::size_t calibration = kThresholdSamples;
    std::string model, guide;
    double ema = 0.010;
    int label = 0;
    std::size_t count = 2000;
    std::int64_t budget = 200;
    int repeats = 3;
    std::string resume;
    ScheduleOpts schedule;
};

Runner setup_sweep(CLI::App& app, Common& c, std::ostream& log)
{
    auto o = std::make_shared<SweepOpts>();
    app.add_option("--data", o->data, "Directory written by make-data");
    app.add_option("--data-seed", o->data_seed, "Mixture seed when --data is absent");
    app.add_option("--calibration-samples", o->calibration);
    app.add_option("--model", o->model, "Main checkpoint")->required();
    app.add_option("--guide", o->guide, "Guide checkpoint with EMA tables")->required();
    app.add_option("--ema", o->ema, "EMA length of the main model");
    app.add_option("--class", o->label)->check(CLI::Range(0, kClassCount - 1));
    app.add_option("--count", o->count, "Population per evaluation");
    auto* budget = app.add_option("--budget", o->budget, "Maximum objective evaluations");
    app.add_option("--repeats", o->repeats, "Re-evaluations of the final neighborhood");
    app.add_option("--resume", o->resume, "Continue from a saved sweep state");
    o->schedule.add(app);
    return [&app, &c, &log, o, budget] {
        const DataBundle d = data_from(o->data, o->data_seed, o->calibration);
        const MetricContext ctx(d.spec, o->label, d.thresholds[static_cast<std::size_t>(o->label)]);
        const auto main = std::make_shared<const ModelDenoiser>(pick(load_checkpoint(o->model), o->ema));
        const Checkpoint guide = load_checkpoint(o->guide);
        const SigmaSchedule sched = o->schedule.build();
        SweepState state;
        if (!o->resume.empty()) {
            state = sweep_state_from_json(read_text(o->resume));
            if (budget->count() > 0) {
                state.budget = o->budget;
            }
        } else {
            state = make_sweep({guidance_weight_axis(), ema_axis("guide_ema")}, o->budget, c.seed, {}, o->repeats);
        }
        const fs::path dir = prepare_output(app, c, "sweep");
        const SweepObjective objective = [&](const std::vector<double>& v, std::uint64_t seed) {
            GuidanceSpec gs;
            gs.mode = GuidanceMode::autoguidance;
            gs.weight = v[0];
            gs.main = main;
            gs.guides = {std::make_shared<const ModelDenoiser>(pick(guide, v[1]))};
            const GuidedDenoiser g(gs);
            return ctx.evaluate(sample_population(g, sched, o->label, o->count, seed)).composite;
        };
        run_sweep(state, objective);
        write_text(dir / "sweep.json", sweep_state_json(state) + "\n");
        log << "sweep " << to_string(state.phase) << " after " << state.used << " evaluations; best "
            << state.best_value() << "\n";
    };
}

struct CorruptOpts {
    std::string data;
    std::uint64_t data_seed = 0;
    std::size_t calibration = kThresholdSamples;
    std::string model;
    double ema = 0.010;
    int label = 0;
    std::size_t count = 4000;
    std::string preset = "paper";
    std::string main_kind = "dropout", guide_kind = "dropout";
    double main_strength = 0.05, guide_strength = 0.10;
    bool frozen = false;
    std::vector<double> w_grid = {1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0};
    ScheduleOpts schedule;
};

Runner setup_corrupt(CLI::App& app, Common& c, std::ostream& log)
{
    auto o = std::make_shared<CorruptOpts>();
    app.add_option("--data", o->data, "Directory written by make-data");
    app.add_option("--data-seed", o->data_seed, "Mixture seed when --data is absent");
    app.add_option("--calibration-samples", o->calibration);
    app.add_option("--model", o->model, "Base checkpoint")->required();
    app.add_option("--ema", o->ema);
    app.add_option("--class", o->label)->check(CLI::Range(0, kClassCount - 1));
    app.add_option("--count", o->count, "Population per guidance weight");
    app.add_option("--preset", o->preset, "paper (matched and mismatched pairs) or custom");
    app.add_option("--main-kind", o->main_kind, "custom: dropout or input_noise");
    app.add_option("--guide-kind", o->guide_kind);
    app.add_option("--main-strength", o->main_strength);
    app.add_option("--guide-strength", o->guide_strength);
    app.add_flag("--frozen-mask", o->frozen, "Dropout: one mask for all evaluations");
    app.add_option("--w-grid", o->w_grid, "Guidance weights (must include 1)")->delimiter(',');
    o->schedule.add(app);
    return [&app, &c, &log, o] {
        const DataBundle d = data_from(o->data, o->data_seed, o->calibration);
        const MetricContext ctx(d.spec, o->label, d.thresholds[static_cast<std::size_t>(o->label)]);
        const auto base = pick(load_checkpoint(o->model), o->ema);
        auto spec_of = [&](CorruptionKind k, double s) {
            CorruptionSpec cs{k, s, c.seed, o->frozen};
            cs.validate();
            return cs;
        };
        std::vector<std::pair<CorruptionSpec, CorruptionSpec>> pairs;
        if (o->preset == "paper") {
            pairs = {{spec_of(CorruptionKind::dropout, 0.05), spec_of(CorruptionKind::dropout, 0.10)},
                     {spec_of(CorruptionKind::input_noise, 0.10), spec_of(CorruptionKind::input_noise, 0.20)},
                     {spec_of(CorruptionKind::dropout, 0.05), spec_of(CorruptionKind::input_noise, 0.20)},
                     {spec_of(CorruptionKind::input_noise, 0.10), spec_of(CorruptionKind::dropout, 0.10)}};
        } else if (o->preset == "custom") {
            pairs = {{spec_of(corruption_kind_from_string(o->main_kind), o->main_strength),
                      spec_of(corruption_kind_from_string(o->guide_kind), o->guide_strength)}};
        } else {
            throw UsageError("unknown preset: " + o->preset);
        }
        DegradationSettings settings;
        settings.schedule = o->schedule.build();
        settings.population = o->count;
        settings.sample_seed = c.seed;
        const fs::path dir = prepare_output(app, c, "corrupt-experiment");
        std::vector<DegradationResult> results;
        nlohmann::ordered_json summary = nlohmann::ordered_json::array();
        for (const auto& [m, g] : pairs) {
            results.push_back(degradation_experiment(base, m, g, o->w_grid, ctx, settings));
            const auto& r = results.back();
            summary.push_back({{"main", to_string(m.kind)},
                               {"main_strength", m.strength},
                               {"guide", to_string(g.kind)},
                               {"guide_strength", g.strength},
                               {"metric_at_w1", r.baseline},
                               {"best_w", r.best_weight()},
                               {"best_metric", r.best_metric()}});
            log << to_string(m.kind) << "/" << to_string(g.kind) << ": w=1 " << r.baseline << ", best w="
                << r.best_weight() << " " << r.best_metric() << "\n";
        }
        write_text(dir / "degradation.csv", degradation_csv(results));
        write_text(dir / "summary.json", summary.dump(2) + "\n");
    };
}

struct RenderOpts {
    std::string preset = "fig1";
    std::string data;
    std::uint64_t data_seed = 0;
    std::size_t calibration = kThresholdSamples;
    std::string model, guide, uncond;
    double ema = 0.010, guide_ema = 0.010;
    int label = 0;
    std::size_t count = 10'000;
    int size = 512;
    double sigma_mid = 0.03;
    double w = 4.0;
    double contour_mass = 0.99;
};

Runner setup_render(CLI::App& app, Common& c, std::ostream& log)
{
    auto o = std::make_shared<RenderOpts>();
    app.add_option("--preset", o->preset, "fig1, fig2 or fig9");
    app.add_option("--data", o->data, "Directory written by make-data");
    app.add_option("--data-seed", o->data_seed, "Mixture seed when --data is absent");
    app.add_option("--model", o->model, "Main checkpoint")->required();
    app.add_option("--guide", o->guide, "Inferior conditional checkpoint");
    app.add_option("--uncond", o->uncond, "Unconditional checkpoint");
    app.add_option("--ema", o->ema);
    app.add_option("--guide-ema", o->guide_ema);
    app.add_option("--class", o->label)->check(CLI::Range(0, kClassCount - 1));
    app.add_option("--count", o->count, "fig1: population per panel");
    app.add_option("--size", o->size, "Panel size in pixels");
    app.add_option("--sigma-mid", o->sigma_mid, "fig2 noise level");
    app.add_option("--w", o->w, "fig2 guidance weight");
    app.add_option("--contour-mass", o->contour_mass, "Probability mass inside contours");
    return [&app, &c, &log, o] {
        const MixtureSpec spec =
            o->data.empty() ? build_fractal(o->data_seed) : load_mixture(fs::path(o->data) / "mixture.json");
        auto load = [&](const std::string& path, double ema, const char* flag) -> DenoiserPtr {
            if (path.empty()) {
                throw UsageError(std::string("preset ") + o->preset + " needs " + flag);
            }
            return std::make_shared<const ModelDenoiser>(pick(load_checkpoint(path), ema));
        };
        const DenoiserPtr main = load(o->model, o->ema, "--model");
        Style style;
        style.width = style.height = o->size;
        std::vector<Panel> panels;
        if (o->preset == "fig1") {
            ConditionSettings cs;
            cs.label = o->label;
            cs.count = o->count;
            cs.seed = c.seed;
            const ConditionModels models{main, load(o->guide, o->guide_ema, "--guide"),
                                         load(o->uncond, o->guide_ema, "--uncond")};
            Fig1Inputs in;
            in.spec = &spec;
            in.label = o->label;
            in.populations = sample_conditions(spec, models, cs);
            in.contour_mass = o->contour_mass;
            panels = fig1_panels(in, style);
        } else if (o->preset == "fig2") {
            Fig2Inputs in;
            in.spec = &spec;
            in.label = o->label;
            in.main = main;
            if (!o->uncond.empty()) {
                in.guide = load(o->uncond, o->guide_ema, "--uncond");
                in.guide_label = std::nullopt;
            } else {
                in.guide = load(o->guide, o->guide_ema, "--guide or --uncond");
                in.guide_label = o->label;
            }
            in.sigma_mid = o->sigma_mid;
            in.weight = o->w;
            in.seed = c.seed;
            in.contour_mass = o->contour_mass;
            panels = fig2_panels(in, style);
        } else if (o->preset == "fig9") {
            Fig9Inputs in;
            in.spec = &spec;
            in.label = o->label;
            in.main = main;
            in.cfg_guide = load(o->uncond, o->guide_ema, "--uncond");
            in.auto_guide = load(o->guide, o->guide_ema, "--guide");
            in.contour_mass = o->contour_mass;
            panels = fig9_panels(in, style);
        } else {
            throw UsageError("unknown preset: " + o->preset);
        }
        const fs::path dir = prepare_output(app, c, "render");
        std::string captions;
        for (const auto& p : panels) {
            render_figure(p.layers, style, dir / (p.name + ".ppm"));
            captions += p.name + ": " + p.caption + "\n";
        }
        write_text(dir / "captions.txt", captions);
        log << "wrote " << panels.size() << " panels to " << dir.string() << "\n";
    };
}

Runner setup_repro(CLI::App& app, Common& c, std::ostream& log)
{
    auto s = std::make_shared<ReproSettings>();
    app.add_option("--data-seed", s->data_seed, "Mixture seed");
    app.add_option("--batch", s->plan.batch_size, "Training batch size");
    app.add_option("--iterations", s->plan.main_iterations, "Main model iterations");
    app.add_option("--guide-iterations", s->plan.guide_iterations, "Guide iterations");
    app.add_option("--width", s->plan.main_width, "Main model width");
    app.add_option("--guide-width", s->plan.guide_width, "Guide width");
    app.add_option("--count", s->conditions.count, "Samples per condition");
    app.add_option("--class", s->conditions.label)->check(CLI::Range(0, kClassCount - 1));
    app.add_option("--cfg-w", s->conditions.cfg_weight);
    app.add_option("--auto-w", s->conditions.auto_weight);
    app.add_option("--trunc-factor", s->conditions.truncation_factor);
    app.add_option("--ema", s->ema_sigma_rel, "EMA length of the main model");
    app.add_option("--guide-ema", s->guide_ema_sigma_rel, "EMA length of the guides");
    app.add_option("--calibration-samples", s->calibration_samples);
    app.add_option("--size", s->image_size, "Panel size in pixels");
    app.add_option("--sigma-mid", s->fig2_sigma_mid);
    app.add_option("--steps", s->conditions.schedule.n_steps, "Heun steps N");
    app.add_flag("!--no-render", s->render, "Skip figures");
    return [&app, &c, &log, s] {
        const fs::path dir = prepare_output(app, c, "repro");
        s->plan.seed = c.seed;
        s->conditions.seed = c.seed;
        s->conditions.schedule = build_schedule(s->conditions.schedule.n_steps);
        const ReproResult r = run_repro(*s, dir, [&](const std::string& m) { log << m << "\n"; });
        log << reports_json(r.reports);
    };
}

struct CommandInfo {
    const char* name;
    const char* help;
    Runner (*setup)(CLI::App&, Common&, std::ostream&);
};

constexpr CommandInfo kCommands[] = {
    {"make-data", "Build the two-class fractal mixture and its outlier thresholds", setup_make_data},
    {"train", "Train one denoiser", setup_train},
    {"sample", "Sample a population, optionally guided", setup_sample},
    {"eval", "Score a population against the mixture", setup_eval},
    {"sweep", "Local grid search over guidance weight and guide EMA", setup_sweep},
    {"corrupt-experiment", "Guide a corrupted model by a more corrupted copy", setup_corrupt},
    {"render", "Render figure presets fig1, fig2, fig9", setup_render},
    {"repro", "Train, sample, evaluate and render the toy figures", setup_repro},
};

void print_usage(std::ostream& out)
{
    out << version_string() << "\nusage: aglab <command> [options]   (aglab <command> --help)\n\ncommands:\n";
    for (const auto& cmd : kCommands) {
        out << "  " << cmd.name << std::string(20 - std::string(cmd.name).size(), ' ') << cmd.help << "\n";
    }
}

int report(std::ostream& err, const char* kind, int code, const std::string& message)
{
    const nlohmann::json j = {{"error", kind}, {"exit_code", code}, {"message", message}};
    err << j.dump() << "\n";
    return code;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        print_usage(out);
        return args.empty() ? usage : ok;
    }
    if (args[0] == "--version") {
        out << version_string() << "\n";
        return ok;
    }
    const CommandInfo* cmd = nullptr;
    for (const auto& c : kCommands) {
        if (args[0] == c.name) {
            cmd = &c;
        }
    }
    if (cmd == nullptr) {
        print_usage(err);
        return report(err, "usage", usage, "unknown command: " + args[0]);
    }

    CLI::App app{cmd->help, std::string("aglab ") + cmd->name};
    Common common;
    add_common(app, common);
    Runner runner;
    try {
        runner = cmd->setup(app, common, out);
        std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
        app.parse(rest);
    } catch (const CLI::Success&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        return report(err, "usage", usage, e.what());
    }

    try {
        apply_threads(common.threads);
        runner();
    } catch (const TrainingAborted& e) {
        return report(err, "numeric", numeric, e.what());
    } catch (const NumericError& e) {
        return report(err, "numeric", numeric, e.what());
    } catch (const IoError& e) {
        return report(err, "io", io, e.what());
    } catch (const fs::filesystem_error& e) {
        return report(err, "io", io, e.what());
    } catch (const nlohmann::json::exception& e) {
        return report(err, "io", io, std::string("malformed input: ") + e.what());
    } catch (const std::invalid_argument& e) {
        return report(err, "usage", usage, e.what());
    } catch (const std::out_of_range& e) {
        return report(err, "usage", usage, e.what());
    } catch (const std::exception& e) {
        return report(err, "numeric", numeric, e.what());
    }
    return ok;
}

} // namespace aglab::cli
