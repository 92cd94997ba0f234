#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csr/dense_matrix.hpp"
#include "csr/index.hpp"
#include "csr/sparse.hpp"
#include "csr/train_config.hpp"

namespace csr {

/// Retrieval-latency protocol: batched queries over a large corpus, timed
/// over repeated rounds after a warm-up, index build excluded.
struct BenchProtocol {
    std::size_t query_batch = 512;
    std::size_t rounds = 2000;
    std::size_t warmup = 100;
    std::size_t db_size = 1'300'000;
    std::uint64_t seed = kDefaultSeed;
    std::size_t threads = 1;
    std::size_t top_n = 1;
    Metric metric = Metric::L2;
    /// Guard against runaway dense allocations (bytes).
    std::uint64_t dense_budget_bytes = 4ull << 30;
};

struct BenchResult {
    double mean_latency = 0.0;  // seconds per query batch
    double std_latency = 0.0;
    std::uint64_t total_mults = 0;  // sum of per-query mult counts for one batch
    double relative_time = 1.0;     // 1.0 for the run itself until normalized
};

enum class IndexKind { Sparse, Dense };

struct BenchParams {
    std::size_t active_dim = 0;  // k for sparse, m for dense
    std::size_t h = 0;           // latent dimension (sparse only)
    std::size_t db_size = 0;     // 0: take the protocol's default
};

/// Uniform random k-sparse rows: supports are uniform k-subsets of [0, h),
/// values uniform in (0, 1].
SparseMatrixCSR synth_sparse_corpus(std::size_t n, std::size_t h, std::size_t k,
                                    std::mt19937_64& rng);
DenseMatrix synth_dense_matrix(std::size_t n, std::size_t m, std::mt19937_64& rng);

BenchResult run_bench(IndexKind kind, const BenchParams& params, const BenchProtocol& proto);

/// File-backed variants for real encoded corpora.
BenchResult run_bench_sparse(const SparseMatrixCSR& corpus, const std::vector<SparseVector>& queries,
                             const BenchProtocol& proto);
BenchResult run_bench_dense(const DenseMatrix& corpus, const DenseMatrix& queries,
                            const BenchProtocol& proto);

inline void normalize_relative(BenchResult& r, const BenchResult& baseline) {
    r.relative_time = baseline.mean_latency > 0.0 ? r.mean_latency / baseline.mean_latency : 1.0;
}

/// Fixed field order: kind,db_size,h,active_dim,query_batch,rounds,warmup,
/// mean_latency_s,std_latency_s,total_mults,relative_time
std::string bench_csv_header();
std::string bench_csv_row(IndexKind kind, const BenchParams& params, const BenchProtocol& proto,
                          const BenchResult& r);

}  // namespace csr
