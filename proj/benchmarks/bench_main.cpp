#include "rfl/ensemble.hpp"
#include "rfl/loss.hpp"
#include "rfl/metrics.hpp"
#include "rfl/random.hpp"
#include "rfl/sampling.hpp"
#include "rfl/trainer.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace rfl;

namespace {

std::vector<Detection> random_dets(std::size_t n, std::uint64_t seed)
{
    SplitMix64 rng(seed);
    std::vector<Detection> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform01() * 900, y = rng.uniform01() * 900;
        out.push_back({{x, y, x + 10 + rng.uniform01() * 60, y + 10 + rng.uniform01() * 60},
                       static_cast<int>(rng.below(5)), rng.uniform01(), rng.below(2) ? "a" : "b", "img"});
    }
    return out;
}

void BM_ScalarLoss(benchmark::State& state)
{
    const LossParams params[] = {LossParams::cross_entropy(), LossParams::focal(2.0),
                                 LossParams::reduced_focal(2.0, 0.5)};
    const auto& p = params[state.range(0)];
    double pt = 0.01;
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss_value(ProbPoint(pt), p) + loss_grad_pt(ProbPoint(pt), p));
        pt = pt > 0.98 ? 0.01 : pt + 0.0097;
    }
}
BENCHMARK(BM_ScalarLoss)->Arg(0)->Arg(1)->Arg(2);

void BM_SoftmaxLoss(benchmark::State& state)
{
    std::vector<double> logits(static_cast<std::size_t>(state.range(0)));
    SplitMix64 rng(1);
    for (auto& l : logits)
        l = rng.normal();
    std::vector<double> grad(logits.size());
    const auto p = LossParams::reduced_focal(2.0, 0.5);
    for (auto _ : state)
        benchmark::DoNotOptimize(softmax_loss_and_grad(logits, 0, p, grad));
}
BENCHMARK(BM_SoftmaxLoss)->Arg(5)->Arg(10)->Arg(60);

void BM_BatchGradient(benchmark::State& state)
{
    const auto data = generate_synthetic({{4000, 2000, 1000, 500, 250, 120, 60, 30, 15, 10}, 10, 4.0, 0.05, 1});
    const auto model = LinearModel::initialized(10, 10, 2);
    std::vector<std::size_t> batch(static_cast<std::size_t>(state.range(0)));
    std::iota(batch.begin(), batch.end(), std::size_t{0});
    const auto p = LossParams::reduced_focal(2.0, 0.25);
    for (auto _ : state)
        benchmark::DoNotOptimize(batch_loss_and_gradient(model, data, batch, p).loss);
}
BENCHMARK(BM_BatchGradient)->Arg(32)->Arg(64)->Arg(256);

void BM_Fuse(benchmark::State& state)
{
    const auto dets = random_dets(static_cast<std::size_t>(state.range(0)), 3);
    for (auto _ : state)
        benchmark::DoNotOptimize(fuse(dets, {}).size());
}
BENCHMARK(BM_Fuse)->Arg(100)->Arg(1000);

void BM_MapAndMrecall(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto dets = random_dets(n, 4);
    std::vector<GroundTruth> gts;
    for (const auto& d : random_dets(n / 2, 5))
        gts.push_back({d.box, d.class_id, d.image_id});
    for (auto _ : state)
        benchmark::DoNotOptimize(map_and_mrecall(dets, gts, 0.5).map);
}
BENCHMARK(BM_MapAndMrecall)->Arg(200)->Arg(2000);

} // namespace

BENCHMARK_MAIN();
