#include <benchmark/benchmark.h>

#include <random>

#include "csr/bench.hpp"
#include "csr/index.hpp"

namespace {

// one iteration = one query against a 100k-row synthetic corpus
void BM_SparseKnn(benchmark::State& state) {
    const std::size_t h = static_cast<std::size_t>(state.range(0));
    const std::size_t k = static_cast<std::size_t>(state.range(1));
    const std::size_t n = 100000;

    std::mt19937_64 rng(42);
    const csr::SparseIndex index(csr::synth_sparse_corpus(n, h, k, rng));
    const auto queries = csr::synth_sparse_corpus(512, h, k, rng).to_rows();

    csr::SparseIndex::Workspace ws;
    std::size_t qi = 0;
    std::uint64_t mults = 0;
    for (auto _ : state) {
        const auto res = index.knn(queries[qi], 1, csr::Metric::L2, ws);
        benchmark::DoNotOptimize(res.hits.data());
        mults += res.mult_count;
        qi = (qi + 1) % queries.size();
    }
    state.SetItemsProcessed(state.iterations());
    state.counters["mults/query"] =
        benchmark::Counter(static_cast<double>(mults) / static_cast<double>(state.iterations()));
}
BENCHMARK(BM_SparseKnn)
    ->Args({8192, 8})
    ->Args({8192, 32})
    ->Args({16384, 8})
    ->Args({16384, 32})
    ->Args({32768, 32});

void BM_DenseKnn(benchmark::State& state) {
    const std::size_t m = static_cast<std::size_t>(state.range(0));
    const std::size_t n = 100000;

    std::mt19937_64 rng(42);
    const auto corpus = csr::synth_dense_matrix(n, m, rng);
    const csr::DenseIndex index(corpus, m);
    const auto queries = csr::synth_dense_matrix(512, m, rng);

    std::size_t qi = 0;
    for (auto _ : state) {
        const auto res = index.knn(queries.row(qi), 1, csr::Metric::L2);
        benchmark::DoNotOptimize(res.hits.data());
        qi = (qi + 1) % queries.rows();
    }
    state.SetItemsProcessed(state.iterations());
    state.counters["mults/query"] = benchmark::Counter(static_cast<double>(n) * m);
}
BENCHMARK(BM_DenseKnn)->Arg(8)->Arg(32)->Arg(256)->Arg(2048);

void BM_SparseDot(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(7);
    const auto rows = csr::synth_sparse_corpus(2, 16384, k, rng).to_rows();
    for (auto _ : state) {
        benchmark::DoNotOptimize(csr::sparse_dot(rows[0], rows[1]).value);
    }
}
BENCHMARK(BM_SparseDot)->Arg(8)->Arg(32)->Arg(256);

}  // namespace
