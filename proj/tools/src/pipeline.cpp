#include "aglab/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aglab/render.hpp"

namespace aglab::pipeline {

namespace fs = std::filesystem;

namespace {

void say(const Log& log, const std::string& msg)
{
    if (log) {
        log(msg);
    }
}

ModelRecipe recipe(const ModelPlan& plan, int width, int iterations, int class_count, std::uint64_t tag)
{
    ModelRecipe r;
    r.arch.hidden_width = width;
    r.arch.class_count = class_count;
    r.train.iterations = iterations;
    r.train.batch_size = plan.batch_size;
    r.train.loss_kind = plan.loss;
    r.train.seed = stream_key(plan.seed, tag);
    return r;
}

} // namespace

ModelRecipe main_recipe(const ModelPlan& plan)
{
    return recipe(plan, plan.main_width, plan.main_iterations, kClassCount, 0x6d61696eULL);
}

ModelRecipe guide_recipe(const ModelPlan& plan)
{
    return recipe(plan, plan.guide_width, plan.guide_iterations, kClassCount, 0x67756964ULL);
}

ModelRecipe uncond_recipe(const ModelPlan& plan)
{
    return recipe(plan, plan.guide_width, plan.guide_iterations, 0, 0x756e636fULL);
}

Checkpoint train_recipe(const ModelRecipe& recipe, const MixtureSpec& spec, const Log& log,
                        std::vector<LossRecord>* curve)
{
    Rng rng(recipe.train.seed);
    const int every = std::max(1, recipe.train.iterations / 8);
    TrainResult result = train(init_model(recipe.arch, recipe.train.seed), spec, recipe.train, rng,
                               [&](const LossRecord& r) {
                                   if (r.step % every == 0) {
                                       char line[96];
                                       std::snprintf(line, sizeof line, "  step %lld loss %.5f",
                                                     static_cast<long long>(r.step), r.loss);
                                       say(log, line);
                                   }
                               });
    if (curve != nullptr) {
        *curve = result.curve;
    }
    return result.to_checkpoint(rng);
}

std::shared_ptr<const ModelParams> pick(const Checkpoint& ckpt, double sigma_rel)
{
    return std::make_shared<const ModelParams>(ckpt.select(sigma_rel));
}

std::array<Points, 5> sample_conditions(const MixtureSpec& spec, const ConditionModels& models,
                                        const ConditionSettings& s, const Log& log)
{
    std::array<Points, 5> pops;
    Rng rng(stream_key(s.seed, 0x67726f756e64ULL));
    pops[ground_truth] = MixtureOracle(spec, s.label).sample(s.count, 0.0, rng);

    auto run = [&](Condition c, GuidanceSpec gs) {
        say(log, std::string("sampling ") + kConditionNames[c]);
        const GuidedDenoiser d(std::move(gs));
        pops[c] = sample_population(d, s.schedule, s.label, s.count, s.seed);
    };
    GuidanceSpec base;
    base.main = models.main;
    run(unguided, base);

    GuidanceSpec cfg_spec = base;
    cfg_spec.mode = GuidanceMode::cfg;
    cfg_spec.weight = s.cfg_weight;
    cfg_spec.guides = {models.uncond};
    run(cfg, cfg_spec);

    GuidanceSpec trunc = base;
    trunc.mode = GuidanceMode::naive_truncation;
    trunc.truncation_factor = s.truncation_factor;
    run(truncation, trunc);

    GuidanceSpec ag = base;
    ag.mode = GuidanceMode::autoguidance;
    ag.weight = s.auto_weight;
    ag.guides = {models.guide};
    run(autoguidance, ag);
    return pops;
}

DataBundle make_data(std::uint64_t seed, std::size_t calibration_samples)
{
    DataBundle d;
    d.spec = build_fractal(seed);
    for (int c = 0; c < kClassCount; ++c) {
        d.thresholds[static_cast<std::size_t>(c)] = calibrate_outlier_threshold(d.spec, c, calibration_samples, seed);
    }
    return d;
}

std::string thresholds_json(const DataBundle& data)
{
    const nlohmann::json j = {{"format", "aglab-thresholds"},
                              {"mixture_seed", data.spec.seed},
                              {"quantile", kOutlierQuantile},
                              {"log_density", data.thresholds}};
    return j.dump(2) + "\n";
}

void save_data(const DataBundle& data, const fs::path& dir)
{
    fs::create_directories(dir);
    save_mixture(data.spec, dir / "mixture.json");
    write_text(dir / "thresholds.json", thresholds_json(data));
}

DataBundle load_data(const fs::path& dir)
{
    DataBundle d;
    d.spec = load_mixture(dir / "mixture.json");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(dir / "thresholds.json"));
    } catch (const nlohmann::json::exception& e) {
        throw IoError((dir / "thresholds.json").string() + ": " + e.what());
    }
    if (j.value("format", "") != "aglab-thresholds" || j.at("mixture_seed").get<std::uint64_t>() != d.spec.seed) {
        throw IoError((dir / "thresholds.json").string() + ": does not belong to this mixture");
    }
    d.thresholds = j.at("log_density").get<std::array<double, kClassCount>>();
    return d;
}

std::string reports_json(const std::array<MetricReport, 5>& reports)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < reports.size(); ++c) {
        j[kConditionNames[c]] = nlohmann::ordered_json::parse(metric_report_json(reports[c]));
    }
    return j.dump(2) + "\n";
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw IoError("cannot write " + path.string());
    }
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

void render_panels(const std::vector<Panel>& panels, const Style& style, const fs::path& dir, std::string& captions)
{
    fs::create_directories(dir);
    for (const auto& p : panels) {
        render_figure(p.layers, style, dir / (p.name + ".ppm"));
        captions += dir.filename().string() + "/" + p.name + ": " + p.caption + "\n";
    }
}

} // namespace

ReproResult run_repro(const ReproSettings& s, const fs::path& out, const Log& log)
{
    fs::create_directories(out / "checkpoints");
    fs::create_directories(out / "populations");

    say(log, "building data");
    const DataBundle data = make_data(s.data_seed, s.calibration_samples);
    save_data(data, out);

    const std::array<std::pair<const char*, ModelRecipe>, 3> recipes = {
        std::pair{"main", main_recipe(s.plan)}, std::pair{"guide", guide_recipe(s.plan)},
        std::pair{"uncond", uncond_recipe(s.plan)}};
    std::array<Checkpoint, 3> ckpts;
    for (std::size_t k = 0; k < recipes.size(); ++k) {
        say(log, std::string("training ") + recipes[k].first);
        std::vector<LossRecord> curve;
        ckpts[k] = train_recipe(recipes[k].second, data.spec, log, &curve);
        save_checkpoint(ckpts[k], out / "checkpoints" / (std::string(recipes[k].first) + ".ckpt"));
        write_text(out / "checkpoints" / (std::string(recipes[k].first) + "_loss.csv"), loss_curve_csv(curve));
    }
    ConditionModels models;
    models.main = std::make_shared<const ModelDenoiser>(pick(ckpts[0], s.ema_sigma_rel));
    models.guide = std::make_shared<const ModelDenoiser>(pick(ckpts[1], s.guide_ema_sigma_rel));
    models.uncond = std::make_shared<const ModelDenoiser>(pick(ckpts[2], s.guide_ema_sigma_rel));

    const std::array<Points, 5> pops = sample_conditions(data.spec, models, s.conditions, log);
    const int label = s.conditions.label;
    const MetricContext ctx(data.spec, label, data.thresholds[static_cast<std::size_t>(label)]);
    ReproResult result;
    for (std::size_t c = 0; c < pops.size(); ++c) {
        result.reports[c] = ctx.evaluate(pops[c], kConditionNames[c]);
        write_text(out / "populations" / (std::string(kConditionNames[c]) + ".csv"), population_csv(pops[c], label));
    }
    write_text(out / "metrics.json", reports_json(result.reports));

    if (s.render) {
        say(log, "rendering");
        Style style;
        style.width = style.height = s.image_size;
        std::string captions;
        Fig1Inputs f1;
        f1.spec = &data.spec;
        f1.label = label;
        f1.populations = pops;
        render_panels(fig1_panels(f1, style), style, out / "figures" / "fig1", captions);

        Fig2Inputs f2;
        f2.spec = &data.spec;
        f2.label = label;
        f2.main = models.main;
        f2.guide = models.uncond;
        f2.guide_label = std::nullopt;
        f2.sigma_mid = s.fig2_sigma_mid;
        f2.weight = s.fig2_weight;
        f2.seed = s.conditions.seed;
        render_panels(fig2_panels(f2, style), style, out / "figures" / "fig2", captions);

        Fig9Inputs f9;
        f9.spec = &data.spec;
        f9.label = label;
        f9.main = models.main;
        f9.cfg_guide = models.uncond;
        f9.auto_guide = models.guide;
        render_panels(fig9_panels(f9, style), style, out / "figures" / "fig9", captions);
        write_text(out / "figures" / "captions.txt", captions);
    }
    return result;
}

} // namespace aglab::pipeline
