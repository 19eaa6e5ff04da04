#include <benchmark/benchmark.h>

#include <random>

#include "vsod/harness/trainer.hpp"
#include "vsod/metrics.hpp"
#include "vsod/model.hpp"
#include "vsod/ops.hpp"
#include "vsod/params.hpp"
#include "vsod/syndata.hpp"

using namespace vsod;

namespace {

Tensor noise(Shape s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor t(s);
    for (double& v : t.values()) v = u(rng);
    return t;
}

void BM_Conv3x3Forward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    ParameterStore store;
    Initializer init(0);
    const Conv conv = Conv::make(store, init, "c", c, c, 3, same3x3());
    const Var x(noise({1, c, hw, hw}, 1));
    NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(conv(x).value().data());
}
BENCHMARK(BM_Conv3x3Forward)->Args({16, 32})->Args({32, 32})->Args({64, 16})->Unit(benchmark::kMicrosecond);

void BM_Conv3x3Backward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    ParameterStore store;
    Initializer init(0);
    const Conv conv = Conv::make(store, init, "c", c, c, 3, same3x3());
    Var x(noise({1, c, hw, hw}, 1), true);
    for (auto _ : state) {
        store.zero_grad();
        backward(ops::mean_all(conv(x)));
    }
}
BENCHMARK(BM_Conv3x3Backward)->Args({16, 32})->Args({32, 32})->Unit(benchmark::kMicrosecond);

void BM_ModelForward(benchmark::State& state) {
    ModelConfig cfg;
    cfg.fusion = static_cast<FusionMode>(state.range(0));
    SaliencyModel model(cfg, 0);
    const Var img(noise({1, 3, 64, 64}, 2));
    NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(img, img).prediction.value().data());
    state.SetLabel(std::string(to_string(cfg.fusion)));
}
BENCHMARK(BM_ModelForward)
    ->Arg(static_cast<int>(FusionMode::CagDde))
    ->Arg(static_cast<int>(FusionMode::Concat))
    ->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    std::vector<syndata::Sample> data;
    for (const auto& f : syndata::generate_sequence(syndata::SceneConfig{}, 1).frames) {
        data.push_back({f.rgb, f.flow_image, f.mask, std::nullopt});
    }
    harness::TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    harness::Trainer trainer(cfg, data);
    for (auto _ : state) benchmark::DoNotOptimize(trainer.step().total);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_EvaluateDataset(benchmark::State& state) {
    std::vector<Tensor> preds, masks;
    for (int i = 0; i < 32; ++i) {
        preds.push_back(noise({1, 1, 64, 64}, 10 + i));
        Tensor m = noise({1, 1, 64, 64}, 100 + i);
        for (double& v : m.values()) v = v > 0.7 ? 1.0 : 0.0;
        masks.push_back(m);
    }
    for (auto _ : state) benchmark::DoNotOptimize(metrics::evaluate_dataset(preds, masks).max_f_beta);
}
BENCHMARK(BM_EvaluateDataset)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
