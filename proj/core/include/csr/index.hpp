#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csr/dense_matrix.hpp"
#include "csr/sparse.hpp"

namespace csr {

enum class Metric { L2, InnerProduct };

struct SearchHit {
    std::uint64_t row;
    double score;  // L2 distance or inner product, depending on the metric
};

struct KnnResult {
    std::vector<SearchHit> hits;   // ranked best-first, ties broken by lower row id
    std::uint64_t mult_count = 0;  // postings touched = Σ_{j in support(q)} |inverted[j]|
};

/// Exact retrieval over a sparse corpus. Scoring scatter-adds each posting of
/// the query's support dimensions into a dense accumulator; rows with zero
/// overlap never contribute multiplications and are ranked through their
/// precomputed norms. Immutable after construction; concurrent queries are
/// safe when each thread uses its own Workspace.
class SparseIndex {
public:
    /// Reusable per-thread query scratch. Stamping replaces per-query zeroing
    /// of the accumulator.
    struct Workspace {
        std::vector<double> score;
        std::vector<std::uint32_t> stamp;
        std::vector<std::uint32_t> touched;
        std::uint32_t epoch = 0;
    };

    explicit SparseIndex(SparseMatrixCSR corpus);

    KnnResult knn(const SparseVector& q, std::size_t n, Metric metric) const;
    KnnResult knn(const SparseVector& q, std::size_t n, Metric metric, Workspace& ws) const;

    std::size_t rows() const { return corpus_.rows(); }
    std::size_t cols() const { return corpus_.cols(); }
    const SparseMatrixCSR& corpus() const { return corpus_; }
    const std::vector<double>& sq_norms() const { return sq_norms_; }
    std::size_t posting_count(std::size_t dim) const {
        return inv_indptr_[dim + 1] - inv_indptr_[dim];
    }

    /// Optional external row identifiers; empty means identity.
    void set_ids(std::vector<std::uint64_t> ids);
    const std::vector<std::uint64_t>& ids() const { return ids_; }

private:
    SparseMatrixCSR corpus_;
    std::vector<double> sq_norms_;
    std::vector<std::uint64_t> inv_indptr_;  // h+1
    std::vector<std::uint32_t> inv_row_;     // nnz, sorted by row within each dim
    std::vector<float> inv_val_;             // nnz
    std::vector<std::uint32_t> by_norm_;     // rows sorted by (sq_norm asc, row asc)
    std::vector<std::uint64_t> ids_;
};

inline SparseIndex build_sparse_index(SparseMatrixCSR codes) {
    return SparseIndex(std::move(codes));
}

/// Dense-truncation baseline: the first m coordinates of each embedding,
/// scanned exhaustively. mult_count is rows*m by definition.
class DenseIndex {
public:
    DenseIndex(const DenseMatrix& embeddings, std::size_t m);

    KnnResult knn(std::span<const float> q, std::size_t n, Metric metric) const;

    std::size_t rows() const { return corpus_.rows(); }
    std::size_t cols() const { return corpus_.cols(); }
    const DenseMatrix& corpus() const { return corpus_; }

private:
    DenseMatrix corpus_;  // N x m
    std::vector<double> sq_norms_;
};

inline DenseIndex build_dense_index(const DenseMatrix& embeddings, std::size_t m) {
    return DenseIndex(embeddings, m);
}

/// Fraction of queries whose nearest neighbor carries the same label.
/// With exclude_self set, query i never matches corpus row i (for the
/// query-set-equals-corpus protocol).
double one_nn_accuracy(const SparseIndex& index, const std::vector<std::uint32_t>& train_labels,
                       const SparseMatrixCSR& query_codes,
                       const std::vector<std::uint32_t>& query_labels, Metric metric,
                       bool exclude_self = false, std::size_t threads = 1);

double one_nn_accuracy_dense(const DenseIndex& index,
                             const std::vector<std::uint32_t>& train_labels,
                             const DenseMatrix& queries,
                             const std::vector<std::uint32_t>& query_labels, Metric metric,
                             bool exclude_self = false, std::size_t threads = 1);

}  // namespace csr
