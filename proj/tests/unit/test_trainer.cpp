#include <doctest.h>

#include <cmath>

#include "aglab/parallel.hpp"
#include "aglab/trainer.hpp"

using namespace aglab;

namespace {

const MixtureSpec& seed0()
{
    static const MixtureSpec spec = build_fractal(0);
    return spec;
}

TrainConfig tiny_config(int iterations)
{
    TrainConfig c;
    c.iterations = iterations;
    c.batch_size = 256;
    c.ema_sigma_rels = {0.01, 0.05};
    return c;
}

ArchDescriptor tiny_arch()
{
    ArchDescriptor a;
    a.hidden_width = 16;
    a.hidden_layers = 2;
    return a;
}

} // namespace

TEST_SUITE("trainer") {

TEST_CASE("noise level collapses to exp(p_mean) as p_std vanishes")
{
    TrainConfig c;
    c.p_std = 1e-12;
    Rng rng(1);
    CHECK(sample_noise_level(c, rng) == doctest::Approx(std::exp(-2.3)).epsilon(1e-9));
    CHECK(std::exp(-2.3) == doctest::Approx(0.1003).epsilon(1e-3));
}

TEST_CASE("log noise level moments")
{
    TrainConfig c;
    Rng rng(2);
    const int n = 1'000'000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double l = std::log(sample_noise_level(c, rng));
        s1 += l;
        s2 += l * l;
    }
    const double mean = s1 / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    CHECK(std::abs(mean - (-2.3)) < 0.005);
    CHECK(std::abs(sd - 1.5) < 0.005);
}

TEST_CASE("learning rate schedule")
{
    TrainConfig c;
    CHECK(learning_rate(c, 512) == 0.01);
    CHECK(learning_rate(c, 2048) == doctest::Approx(0.005).epsilon(1e-15));
    CHECK(learning_rate(c, 1) == 0.01);
    CHECK_THROWS(learning_rate(c, 0));
}

TEST_CASE("zero iterations return the initial model")
{
    const ModelParams init = init_model(tiny_arch(), 3);
    Rng rng(1);
    const TrainResult r = train(init, seed0(), tiny_config(0), rng);
    std::vector<double> a, b;
    init.flatten(a);
    r.params.flatten(b);
    CHECK(a == b);
    CHECK(r.curve.empty());
}

TEST_CASE("training is deterministic and independent of the thread cap")
{
    auto run = [](int threads) {
        set_thread_cap(threads);
        Rng rng(5);
        TrainConfig c = tiny_config(8);
        c.batch_size = 1024;
        const TrainResult r = train(init_model(tiny_arch(), 3), seed0(), c, rng);
        set_thread_cap(1);
        return serialize_checkpoint(r.to_checkpoint(rng));
    };
    const std::string a = run(1);
    CHECK(a == run(1));
    CHECK(a == run(3));
}

TEST_CASE("loss decreases on a short run")
{
    Rng rng(7);
    TrainConfig c = tiny_config(150);
    const TrainResult r = train(init_model(tiny_arch(), 1), seed0(), c, rng);
    REQUIRE(r.curve.size() == 150);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 20; ++i) {
        head += r.curve[static_cast<std::size_t>(i)].loss;
        tail += r.curve[r.curve.size() - 1 - static_cast<std::size_t>(i)].loss;
    }
    MESSAGE("first 20 mean " << head / 20 << ", last 20 mean " << tail / 20);
    CHECK(tail < 0.8 * head);
    CHECK(r.ema.size() == 2);
    const Checkpoint ck = r.to_checkpoint(rng);
    CHECK(ck.ema.size() == 2);
    CHECK(ck.select(0.01).layers[0] != ck.select(0.05).layers[0]);
}

TEST_CASE("weight rows are kept at norm sqrt(fan_in)")
{
    Rng rng(7);
    const TrainResult r = train(init_model(tiny_arch(), 1), seed0(), tiny_config(3), rng);
    for (const auto& w : r.params.layers) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            CHECK(w.row(i).norm() == doctest::Approx(std::sqrt(static_cast<double>(w.cols()))).epsilon(1e-12));
        }
    }
}

TEST_CASE("batches alternate classes")
{
    Rng rng(1);
    TrainConfig c = tiny_config(1);
    c.batch_size = 6;
    const ModelParams p = init_model(tiny_arch(), 1);
    const TrainingBatch b = draw_training_batch(p, seed0(), c, rng);
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(b.labels[i] == ClassLabel(static_cast<int>(i % 2)));
        CHECK(b.sigma[i] > 0.0);
    }
}

TEST_CASE("invalid configuration is rejected")
{
    TrainConfig c;
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.iterations = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("loss curve csv")
{
    const std::string csv = loss_curve_csv({{1, 0.5, 0.01}, {2, 0.25, 0.01}});
    CHECK(csv.rfind("step,loss,lr\n1,0.5,0.01", 0) == 0);
}

}
