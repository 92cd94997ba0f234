#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace csr {

/// Indices of the k largest entries of x, returned in ascending index order.
/// Ties are broken toward the lower index; k > x.size() returns all indices.
/// Selection is a strict total order on (value desc, index asc), so the
/// selected set at k is always a subset of the selected set at any k' >= k.
template <typename T>
std::vector<std::uint32_t> top_k_select(std::span<const T> x, std::size_t k) {
    if (k < 1) throw std::invalid_argument("top_k_select: k must be >= 1");
    const std::size_t n = x.size();
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    if (k >= n) {
        return idx;
    }
    auto before = [&x](std::uint32_t a, std::uint32_t b) {
        if (x[a] != x[b]) return x[a] > x[b];
        return a < b;
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k) - 1, idx.end(), before);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

template <typename T>
std::vector<std::uint32_t> top_k_select(const std::vector<T>& x, std::size_t k) {
    return top_k_select(std::span<const T>(x), k);
}

/// k-sparse non-negative vector: sorted coordinate list plus strictly
/// positive values. Zero-valued entries are never stored.
class SparseVector {
public:
    SparseVector() = default;

    explicit SparseVector(std::size_t dim) : dim_(dim) {}

    SparseVector(std::size_t dim, std::vector<std::uint32_t> indices, std::vector<float> values)
        : dim_(dim) {
        if (indices.size() != values.size()) {
            throw std::invalid_argument("SparseVector: index/value length mismatch");
        }
        indices_.reserve(indices.size());
        values_.reserve(values.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const float v = values[i];
            if (v == 0.0f) continue;  // zeros are dropped, not stored
            if (!(v > 0.0f) || !std::isfinite(v)) {
                throw std::invalid_argument("SparseVector: values must be finite and positive");
            }
            if (indices[i] >= dim_) {
                throw std::invalid_argument("SparseVector: index out of range");
            }
            if (!indices_.empty() && indices[i] <= indices_.back()) {
                throw std::invalid_argument("SparseVector: indices must be strictly increasing");
            }
            indices_.push_back(indices[i]);
            values_.push_back(v);
        }
    }

    std::size_t dim() const { return dim_; }
    std::size_t nnz() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }

    const std::vector<std::uint32_t>& indices() const { return indices_; }
    const std::vector<float>& values() const { return values_; }

    std::vector<float> densify() const {
        std::vector<float> out(dim_, 0.0f);
        for (std::size_t i = 0; i < indices_.size(); ++i) out[indices_[i]] = values_[i];
        return out;
    }

    double squared_norm() const {
        double s = 0.0;
        for (float v : values_) s += static_cast<double>(v) * static_cast<double>(v);
        return s;
    }

    bool operator==(const SparseVector& o) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<std::uint32_t> indices_;
    std::vector<float> values_;
};

struct SparseDot {
    double value = 0.0;
    std::uint64_t mults = 0;  // |support(a) ∩ support(b)|
};

/// Zero-skipping inner product over shared indices. Accumulates in 64-bit.
inline SparseDot sparse_dot(const SparseVector& a, const SparseVector& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("sparse_dot: dimension mismatch");
    SparseDot r;
    const auto& ai = a.indices();
    const auto& bi = b.indices();
    const auto& av = a.values();
    const auto& bv = b.values();
    std::size_t i = 0, j = 0;
    while (i < ai.size() && j < bi.size()) {
        if (ai[i] < bi[j]) {
            ++i;
        } else if (bi[j] < ai[i]) {
            ++j;
        } else {
            r.value += static_cast<double>(av[i]) * static_cast<double>(bv[j]);
            ++r.mults;
            ++i;
            ++j;
        }
    }
    return r;
}

/// Compressed-sparse-row store for a corpus of sparse vectors.
class SparseMatrixCSR {
public:
    SparseMatrixCSR() : indptr_(1, 0) {}

    SparseMatrixCSR(std::size_t rows, std::size_t cols, std::vector<std::uint64_t> indptr,
                    std::vector<std::uint32_t> indices, std::vector<float> values)
        : rows_(rows), cols_(cols), indptr_(std::move(indptr)),
          indices_(std::move(indices)), values_(std::move(values)) {
        validate();
    }

    static SparseMatrixCSR from_rows(const std::vector<SparseVector>& rows, std::size_t cols) {
        SparseMatrixCSR m;
        m.rows_ = rows.size();
        m.cols_ = cols;
        m.indptr_.assign(1, 0);
        m.indptr_.reserve(rows.size() + 1);
        std::size_t nnz = 0;
        for (const auto& r : rows) nnz += r.nnz();
        m.indices_.reserve(nnz);
        m.values_.reserve(nnz);
        for (const auto& r : rows) {
            if (r.dim() != cols) throw std::invalid_argument("from_rows: row dimension mismatch");
            m.indices_.insert(m.indices_.end(), r.indices().begin(), r.indices().end());
            m.values_.insert(m.values_.end(), r.values().begin(), r.values().end());
            m.indptr_.push_back(m.indices_.size());
        }
        return m;
    }

    std::vector<SparseVector> to_rows() const {
        std::vector<SparseVector> out;
        out.reserve(rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            std::vector<std::uint32_t> idx(indices_.begin() + indptr_[i], indices_.begin() + indptr_[i + 1]);
            std::vector<float> val(values_.begin() + indptr_[i], values_.begin() + indptr_[i + 1]);
            out.emplace_back(cols_, std::move(idx), std::move(val));
        }
        return out;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return indices_.size(); }

    const std::vector<std::uint64_t>& indptr() const { return indptr_; }
    const std::vector<std::uint32_t>& indices() const { return indices_; }
    const std::vector<float>& values() const { return values_; }

    std::size_t row_nnz(std::size_t i) const { return indptr_[i + 1] - indptr_[i]; }
    std::span<const std::uint32_t> row_indices(std::size_t i) const {
        return {indices_.data() + indptr_[i], row_nnz(i)};
    }
    std::span<const float> row_values(std::size_t i) const {
        return {values_.data() + indptr_[i], row_nnz(i)};
    }

    void validate() const {
        if (indptr_.size() != rows_ + 1) throw std::invalid_argument("CSR: indptr length != rows+1");
        if (indptr_.front() != 0) throw std::invalid_argument("CSR: indptr[0] != 0");
        if (indptr_.back() != indices_.size() || indices_.size() != values_.size()) {
            throw std::invalid_argument("CSR: indptr/indices/values lengths inconsistent");
        }
        for (std::size_t i = 0; i < rows_; ++i) {
            if (indptr_[i + 1] < indptr_[i]) throw std::invalid_argument("CSR: indptr not non-decreasing");
            for (std::size_t p = indptr_[i]; p < indptr_[i + 1]; ++p) {
                if (indices_[p] >= cols_) throw std::invalid_argument("CSR: column index out of range");
                if (p > indptr_[i] && indices_[p] <= indices_[p - 1]) {
                    throw std::invalid_argument("CSR: row indices not strictly increasing");
                }
                if (!(values_[p] > 0.0f) || !std::isfinite(values_[p])) {
                    throw std::invalid_argument("CSR: values must be finite and positive");
                }
            }
        }
    }

    bool operator==(const SparseMatrixCSR& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint64_t> indptr_;
    std::vector<std::uint32_t> indices_;
    std::vector<float> values_;
};

struct SparseMatvec {
    std::vector<float> values;  // length m.rows
    std::uint64_t mults = 0;    // Σ_i |support(row_i) ∩ support(q)|
};

/// Per-row sparse dots of a CSR matrix against one sparse query.
/// Row i is bit-identical to sparse_dot(row_i, q).
inline SparseMatvec sparse_dense_matvec(const SparseMatrixCSR& m, const SparseVector& q) {
    if (m.cols() != q.dim()) throw std::invalid_argument("sparse_dense_matvec: dimension mismatch");
    SparseMatvec out;
    out.values.resize(m.rows(), 0.0f);
    const auto& qi = q.indices();
    const auto& qv = q.values();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto ri = m.row_indices(r);
        auto rv = m.row_values(r);
        double acc = 0.0;
        std::size_t i = 0, j = 0;
        while (i < ri.size() && j < qi.size()) {
            if (ri[i] < qi[j]) {
                ++i;
            } else if (qi[j] < ri[i]) {
                ++j;
            } else {
                acc += static_cast<double>(rv[i]) * static_cast<double>(qv[j]);
                ++out.mults;
                ++i;
                ++j;
            }
        }
        out.values[r] = static_cast<float>(acc);
    }
    return out;
}

}  // namespace csr
