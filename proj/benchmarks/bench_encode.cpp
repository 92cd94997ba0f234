#include <benchmark/benchmark.h>

#include <random>

#include "csr/bench.hpp"
#include "csr/model.hpp"
#include "csr/objective.hpp"

namespace {

void BM_Encode(benchmark::State& state) {
    const std::size_t d = 256;
    const std::size_t h = static_cast<std::size_t>(state.range(0));
    const std::size_t k = static_cast<std::size_t>(state.range(1));

    std::mt19937_64 rng(3);
    const auto model = csr::init_model(d, h, 3);
    const auto data = csr::synth_dense_matrix(256, d, rng);

    std::size_t row = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(csr::encode(model, data.row(row), k).nnz());
        row = (row + 1) % data.rows();
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Encode)->Args({1024, 8})->Args({1024, 32})->Args({4096, 32});

void BM_TrainStep(benchmark::State& state) {
    const std::size_t d = 64, h = 256, batch = 32;
    std::mt19937_64 rng(5);
    const auto model = csr::init_model(d, h, 5);
    const auto batch_data = csr::synth_dense_matrix(batch, d, rng);

    csr::TrainConfig cfg;
    cfg.k = 8;
    cfg.h = h;
    cfg.batch_size = batch;
    for (auto _ : state) {
        const auto bd = csr::batch_loss_and_grads(model, batch_data, nullptr, cfg, {});
        benchmark::DoNotOptimize(bd.total);
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TrainStep);

}  // namespace
