#include "csr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace csr {

namespace {

/// Floyd's k-subset sample from [0, h), returned sorted.
std::vector<std::uint32_t> sample_support(std::size_t h, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::size_t j = h - k; j < h; ++j) {
        std::uniform_int_distribution<std::size_t> dist(0, j);
        const std::uint32_t t = static_cast<std::uint32_t>(dist(rng));
        if (std::find(out.begin(), out.end(), t) == out.end()) {
            out.push_back(t);
        } else {
            out.push_back(static_cast<std::uint32_t>(j));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

float positive_unit(std::mt19937_64& rng) {
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    return 1.0f - dist(rng);  // (0, 1]
}

struct RoundStats {
    double mean = 0.0;
    double stddev = 0.0;
};

RoundStats stats(const std::vector<double>& xs) {
    RoundStats s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.stddev = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
    return s;
}

/// Runs warmup + timed rounds of `batch()`, which must return the batch's
/// total mult count. Mults are recorded once (they are data-dependent only).
template <typename BatchFn>
BenchResult run_rounds(const BenchProtocol& proto, BatchFn&& batch) {
    if (proto.rounds < 1) throw std::invalid_argument("bench: rounds must be >= 1");
    BenchResult out;
    using clock = std::chrono::steady_clock;
    bool counted = false;
    for (std::size_t r = 0; r < proto.warmup; ++r) {
        const std::uint64_t mults = batch();
        if (!counted) {
            out.total_mults = mults;
            counted = true;
        }
    }
    std::vector<double> times;
    times.reserve(proto.rounds);
    for (std::size_t r = 0; r < proto.rounds; ++r) {
        const auto t0 = clock::now();
        const std::uint64_t mults = batch();
        const auto t1 = clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
        if (!counted) {
            out.total_mults = mults;
            counted = true;
        }
    }
    const RoundStats s = stats(times);
    out.mean_latency = s.mean;
    out.std_latency = s.stddev;
    return out;
}

template <typename QueryFn>
std::uint64_t sharded_batch(std::size_t nq, std::size_t threads, QueryFn&& one) {
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, nq));
    if (nthreads == 1) {
        std::uint64_t mults = 0;
        for (std::size_t i = 0; i < nq; ++i) mults += one(0, i);
        return mults;
    }
    std::vector<std::uint64_t> mults(nthreads, 0);
    std::vector<std::thread> pool;
    const std::size_t chunk = (nq + nthreads - 1) / nthreads;
    for (std::size_t t = 0; t < nthreads; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(nq, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, t, b, e] {
            std::uint64_t local = 0;
            for (std::size_t i = b; i < e; ++i) local += one(t, i);
            mults[t] = local;
        });
    }
    for (auto& th : pool) th.join();
    std::uint64_t total = 0;
    for (std::uint64_t m : mults) total += m;
    return total;
}

}  // namespace

SparseMatrixCSR synth_sparse_corpus(std::size_t n, std::size_t h, std::size_t k,
                                    std::mt19937_64& rng) {
    if (k < 1 || k > h) throw std::invalid_argument("synth_sparse_corpus: require 1 <= k <= h");
    std::vector<std::uint64_t> indptr(n + 1, 0);
    std::vector<std::uint32_t> indices;
    std::vector<float> values;
    indices.reserve(n * k);
    values.reserve(n * k);
    for (std::size_t r = 0; r < n; ++r) {
        const auto support = sample_support(h, k, rng);
        for (std::uint32_t j : support) {
            indices.push_back(j);
            values.push_back(positive_unit(rng));
        }
        indptr[r + 1] = indices.size();
    }
    return SparseMatrixCSR(n, h, std::move(indptr), std::move(indices), std::move(values));
}

DenseMatrix synth_dense_matrix(std::size_t n, std::size_t m, std::mt19937_64& rng) {
    DenseMatrix out(n, m);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (float& v : out.data()) v = dist(rng);
    return out;
}

BenchResult run_bench_sparse(const SparseMatrixCSR& corpus, const std::vector<SparseVector>& queries,
                             const BenchProtocol& proto) {
    const SparseIndex index(corpus);
    std::vector<SparseIndex::Workspace> ws(std::max<std::size_t>(1, proto.threads));
    auto batch = [&]() {
        return sharded_batch(queries.size(), proto.threads, [&](std::size_t tid, std::size_t i) {
            return index.knn(queries[i], proto.top_n, proto.metric, ws[tid]).mult_count;
        });
    };
    return run_rounds(proto, batch);
}

BenchResult run_bench_dense(const DenseMatrix& corpus, const DenseMatrix& queries,
                            const BenchProtocol& proto) {
    if (corpus.cols() != queries.cols()) {
        throw std::invalid_argument("run_bench_dense: corpus/query dimension mismatch");
    }
    const DenseIndex index(corpus, corpus.cols());
    auto batch = [&]() {
        return sharded_batch(queries.rows(), proto.threads, [&](std::size_t, std::size_t i) {
            return index.knn(queries.row(i), proto.top_n, proto.metric).mult_count;
        });
    };
    return run_rounds(proto, batch);
}

BenchResult run_bench(IndexKind kind, const BenchParams& params, const BenchProtocol& proto) {
    const std::size_t n = params.db_size ? params.db_size : proto.db_size;
    if (params.active_dim < 1) throw std::invalid_argument("run_bench: active_dim must be >= 1");
    std::mt19937_64 rng(proto.seed);
    if (kind == IndexKind::Sparse) {
        if (params.h < params.active_dim) {
            throw std::invalid_argument("run_bench: sparse benchmark requires h >= k");
        }
        const auto corpus = synth_sparse_corpus(n, params.h, params.active_dim, rng);
        const auto query_csr = synth_sparse_corpus(proto.query_batch, params.h, params.active_dim, rng);
        return run_bench_sparse(corpus, query_csr.to_rows(), proto);
    }
    const std::uint64_t bytes = static_cast<std::uint64_t>(n) * params.active_dim * sizeof(float);
    if (bytes > proto.dense_budget_bytes) {
        throw std::invalid_argument("run_bench: dense corpus of " + std::to_string(bytes) +
                                    " bytes exceeds the memory budget");
    }
    const auto corpus = synth_dense_matrix(n, params.active_dim, rng);
    const auto queries = synth_dense_matrix(proto.query_batch, params.active_dim, rng);
    return run_bench_dense(corpus, queries, proto);
}

std::string bench_csv_header() {
    return "kind,db_size,h,active_dim,query_batch,rounds,warmup,mean_latency_s,std_latency_s,"
           "total_mults,relative_time\n";
}

std::string bench_csv_row(IndexKind kind, const BenchParams& params, const BenchProtocol& proto,
                          const BenchResult& r) {
    char buf[256];
    const std::size_t n = params.db_size ? params.db_size : proto.db_size;
    std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%zu,%zu,%zu,%zu,%.9g,%.9g,%llu,%.9g\n",
                  kind == IndexKind::Sparse ? "sparse" : "dense", n,
                  kind == IndexKind::Sparse ? params.h : 0, params.active_dim, proto.query_batch,
                  proto.rounds, proto.warmup, r.mean_latency, r.std_latency,
                  static_cast<unsigned long long>(r.total_mults), r.relative_time);
    return buf;
}

}  // namespace csr
