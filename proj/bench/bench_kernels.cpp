#include <benchmark/benchmark.h>

#include "sgnn/datagen.hpp"
#include "sgnn/modelselect.hpp"
#include "sgnn/oracle.hpp"

using namespace sgnn;

namespace {

Exec policy(const benchmark::State& state)
{
    return state.range(0) ? Exec::Parallel : Exec::Serial;
}

void label(benchmark::State& state)
{
    state.SetLabel(state.range(0) ? "parallel" : "serial");
}

void BM_GenerateDataset(benchmark::State& state)
{
    const auto task = datagen::lds_params_task(0.1);
    for (auto _ : state) benchmark::DoNotOptimize(datagen::generate_dataset(task, 20000, 1, policy(state)));
    state.SetItemsProcessed(state.iterations() * 20000);
    label(state);
}

void BM_KernelBayesBatch(benchmark::State& state)
{
    const auto task = datagen::lds_params_task(0.1);
    const auto lib = oracle::build_library(task, 5000, 2);
    const auto q = datagen::generate_dataset(task, 200, 3).inputs();
    for (auto _ : state) benchmark::DoNotOptimize(oracle::kernel_bayes_batch(q, lib, 20.0, policy(state)));
    state.SetItemsProcessed(state.iterations() * 200);
    label(state);
}

void BM_MedianBandwidth(benchmark::State& state)
{
    const auto lib = oracle::build_library(datagen::lds_params_task(0.1), 3000, 4);
    for (auto _ : state)
        benchmark::DoNotOptimize(oracle::median_sq_bandwidth(lib.inputs, 5, oracle::BandwidthRule::MedianSquaredDistance,
                                                             1'000'000, policy(state)));
    label(state);
}

void BM_BuildLibrary(benchmark::State& state)
{
    const auto task = datagen::sir_forecast_task(0.01);
    for (auto _ : state) benchmark::DoNotOptimize(oracle::build_library(task, 5000, 6, policy(state)));
    state.SetItemsProcessed(state.iterations() * 5000);
    label(state);
}

void BM_AicSelectBatch(benchmark::State& state)
{
    const auto ds = datagen::generate_dataset(datagen::model_class_task(0.01), 16, 7);
    modelselect::FitConfig cfg;
    cfg.multistart = 2;
    for (auto _ : state) benchmark::DoNotOptimize(modelselect::aic_select_batch(ds.inputs(), cfg, policy(state)));
    state.SetItemsProcessed(state.iterations() * 16);
    label(state);
}

}  // namespace

BENCHMARK(BM_GenerateDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelBayesBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MedianBandwidth)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildLibrary)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AicSelectBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
