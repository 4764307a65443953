#include <benchmark/benchmark.h>

#include "aglab/guidance.hpp"
#include "aglab/metrics.hpp"
#include "aglab/mixture.hpp"
#include "aglab/netmodel.hpp"
#include "aglab/parallel.hpp"
#include "aglab/sampler.hpp"

using namespace aglab;

namespace {

const MixtureSpec& spec()
{
    static const MixtureSpec s = build_fractal(0);
    return s;
}

ModelParams model(int width)
{
    ArchDescriptor a;
    a.hidden_width = width;
    ModelParams p = init_model(a, 1);
    p.output_gain = 0.5;
    return p;
}

Points points(int n)
{
    Rng rng(3);
    return MixtureOracle(spec(), 0).sample(static_cast<std::size_t>(n), 0.05, rng);
}

void BM_MixtureScore(benchmark::State& state)
{
    const MixtureOracle o(spec(), 0);
    const Points x = points(256);
    for (auto _ : state) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            benchmark::DoNotOptimize(o.score(x.col(j), 0.05));
        }
    }
    state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_MixtureScore);

void BM_ModelScore(benchmark::State& state)
{
    const ModelParams p = model(static_cast<int>(state.range(0)));
    const Points x = points(1024);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model_score_batch(p, x, 0.05, 0));
    }
    state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_ModelScore)->Arg(32)->Arg(64);

void BM_GradParams(benchmark::State& state)
{
    const ModelParams p = model(64);
    TrainingBatch b;
    b.x = points(512);
    b.target = Points::Zero(2, b.x.cols());
    b.sigma.assign(static_cast<std::size_t>(b.x.cols()), 0.1);
    b.labels.assign(static_cast<std::size_t>(b.x.cols()), ClassLabel(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_params(p, b));
    }
    state.SetItemsProcessed(state.iterations() * b.x.cols());
}
BENCHMARK(BM_GradParams);

void BM_SampleAutoguidance(benchmark::State& state)
{
    set_thread_cap(1);
    GuidanceSpec gs;
    gs.mode = GuidanceMode::autoguidance;
    gs.weight = 3.0;
    gs.main = std::make_shared<ModelDenoiser>(model(64));
    gs.guides = {std::make_shared<ModelDenoiser>(model(32))};
    const GuidedDenoiser d(gs);
    const SigmaSchedule s = build_schedule();
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_population(d, s, 0, 256, 0));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_SampleAutoguidance)->Unit(benchmark::kMillisecond);

void BM_MetricEvaluate(benchmark::State& state)
{
    const MetricContext ctx(spec(), 0, std::uint64_t{0}, 20'000);
    const Points x = points(2000);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ctx.evaluate(x));
    }
}
BENCHMARK(BM_MetricEvaluate)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
