#include "csr/index.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>
#include <thread>

namespace csr {

namespace {

/// Strict "ranks ahead of" order under a metric, ties to the lower row id.
struct HitBetter {
    Metric metric;
    bool operator()(const SearchHit& a, const SearchHit& b) const {
        if (a.score != b.score) {
            return metric == Metric::InnerProduct ? a.score > b.score : a.score < b.score;
        }
        return a.row < b.row;
    }
};

}  // namespace

SparseIndex::SparseIndex(SparseMatrixCSR corpus) : corpus_(std::move(corpus)) {
    const std::size_t n = corpus_.rows();
    const std::size_t h = corpus_.cols();
    if (n >= std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("SparseIndex: row count exceeds 32-bit posting ids");
    }

    sq_norms_.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (float v : corpus_.row_values(r)) s += static_cast<double>(v) * static_cast<double>(v);
        sq_norms_[r] = s;
    }

    inv_indptr_.assign(h + 1, 0);
    for (std::uint32_t j : corpus_.indices()) ++inv_indptr_[j + 1];
    for (std::size_t j = 0; j < h; ++j) inv_indptr_[j + 1] += inv_indptr_[j];

    inv_row_.resize(corpus_.nnz());
    inv_val_.resize(corpus_.nnz());
    std::vector<std::uint64_t> cursor(inv_indptr_.begin(), inv_indptr_.end() - 1);
    for (std::size_t r = 0; r < n; ++r) {
        const auto idx = corpus_.row_indices(r);
        const auto val = corpus_.row_values(r);
        for (std::size_t t = 0; t < idx.size(); ++t) {
            const std::uint64_t pos = cursor[idx[t]]++;
            inv_row_[pos] = static_cast<std::uint32_t>(r);
            inv_val_[pos] = val[t];
        }
    }

    by_norm_.resize(n);
    for (std::size_t r = 0; r < n; ++r) by_norm_[r] = static_cast<std::uint32_t>(r);
    std::sort(by_norm_.begin(), by_norm_.end(), [this](std::uint32_t a, std::uint32_t b) {
        if (sq_norms_[a] != sq_norms_[b]) return sq_norms_[a] < sq_norms_[b];
        return a < b;
    });
}

void SparseIndex::set_ids(std::vector<std::uint64_t> ids) {
    if (!ids.empty() && ids.size() != corpus_.rows()) {
        throw std::invalid_argument("SparseIndex: ids length must match corpus rows");
    }
    ids_ = std::move(ids);
}

KnnResult SparseIndex::knn(const SparseVector& q, std::size_t n, Metric metric) const {
    Workspace ws;
    return knn(q, n, metric, ws);
}

KnnResult SparseIndex::knn(const SparseVector& q, std::size_t n, Metric metric,
                           Workspace& ws) const {
    if (q.dim() != corpus_.cols()) throw std::invalid_argument("knn: query dimension mismatch");
    if (n < 1) throw std::invalid_argument("knn: n must be >= 1");

    const std::size_t rows = corpus_.rows();
    KnnResult out;
    if (rows == 0) return out;
    n = std::min(n, rows);

    if (ws.score.size() != rows) {
        ws.score.assign(rows, 0.0);
        ws.stamp.assign(rows, 0);
        ws.epoch = 0;
    }
    if (++ws.epoch == 0) {
        std::fill(ws.stamp.begin(), ws.stamp.end(), 0u);
        ws.epoch = 1;
    }
    ws.touched.clear();

    const auto& qi = q.indices();
    const auto& qv = q.values();
    for (std::size_t t = 0; t < qi.size(); ++t) {
        const std::uint32_t j = qi[t];
        const double qval = qv[t];
        const std::uint64_t begin = inv_indptr_[j];
        const std::uint64_t end = inv_indptr_[j + 1];
        out.mult_count += end - begin;
        for (std::uint64_t p = begin; p < end; ++p) {
            const std::uint32_t r = inv_row_[p];
            if (ws.stamp[r] != ws.epoch) {
                ws.stamp[r] = ws.epoch;
                ws.score[r] = 0.0;
                ws.touched.push_back(r);
            }
            ws.score[r] += static_cast<double>(inv_val_[p]) * qval;
        }
    }

    out.hits.reserve(n);
    if (metric == Metric::InnerProduct) {
        std::vector<SearchHit> cand;
        cand.reserve(ws.touched.size());
        for (std::uint32_t r : ws.touched) cand.push_back({r, ws.score[r]});
        std::sort(cand.begin(), cand.end(), HitBetter{metric});
        // positive values make every overlapping score strictly positive, so
        // zero-overlap rows always rank after the touched ones, by row id
        for (std::size_t i = 0; i < cand.size() && out.hits.size() < n; ++i) out.hits.push_back(cand[i]);
        for (std::uint32_t r = 0; out.hits.size() < n; ++r) {
            if (ws.stamp[r] != ws.epoch) out.hits.push_back({r, 0.0});
        }
        return out;
    }

    // L2 through the norm identity: d(q,x) = |q|^2 + |x|^2 - 2 q.x
    const double qq = q.squared_norm();
    std::vector<SearchHit> cand;
    cand.reserve(ws.touched.size());
    for (std::uint32_t r : ws.touched) cand.push_back({r, qq + sq_norms_[r] - 2.0 * ws.score[r]});
    std::sort(cand.begin(), cand.end(), HitBetter{metric});

    // merge the scored candidates with the untouched rows streamed in
    // (norm asc, row asc) order; distance is monotone in the norm
    std::size_t ci = 0;
    std::size_t si = 0;
    const HitBetter better{metric};
    while (out.hits.size() < n) {
        while (si < rows && ws.stamp[by_norm_[si]] == ws.epoch) ++si;
        const bool have_c = ci < cand.size();
        const bool have_s = si < rows;
        if (have_c && have_s) {
            const SearchHit sh{by_norm_[si], qq + sq_norms_[by_norm_[si]]};
            if (better(cand[ci], sh)) {
                out.hits.push_back(cand[ci++]);
            } else {
                out.hits.push_back(sh);
                ++si;
            }
        } else if (have_c) {
            out.hits.push_back(cand[ci++]);
        } else {
            out.hits.push_back({by_norm_[si], qq + sq_norms_[by_norm_[si]]});
            ++si;
        }
    }
    return out;
}

namespace {

/// 4-way unrolled dot with 64-bit accumulation. Norms and dots share this
/// routine so a self-query yields an exact zero L2 distance.
double dot4(const float* a, const float* b, std::size_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        a1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
        a2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
        a3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
    }
    for (; i < n; ++i) a0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return (a0 + a1) + (a2 + a3);
}

}  // namespace

DenseIndex::DenseIndex(const DenseMatrix& embeddings, std::size_t m)
    : corpus_(embeddings.truncate_cols(m)) {
    sq_norms_.resize(corpus_.rows());
    for (std::size_t r = 0; r < corpus_.rows(); ++r) {
        const auto row = corpus_.row(r);
        sq_norms_[r] = dot4(row.data(), row.data(), row.size());
    }
}

KnnResult DenseIndex::knn(std::span<const float> q, std::size_t n, Metric metric) const {
    if (q.size() != corpus_.cols()) throw std::invalid_argument("knn: query dimension mismatch");
    if (n < 1) throw std::invalid_argument("knn: n must be >= 1");

    const std::size_t rows = corpus_.rows();
    const std::size_t m = corpus_.cols();
    KnnResult out;
    if (rows == 0) return out;
    n = std::min(n, rows);
    out.mult_count = static_cast<std::uint64_t>(rows) * m;

    const double qq = metric == Metric::L2 ? dot4(q.data(), q.data(), m) : 0.0;

    const HitBetter better{metric};
    auto worse = [&better](const SearchHit& a, const SearchHit& b) { return better(a, b); };
    // priority_queue with "better" as comparator keeps the worst hit on top
    std::priority_queue<SearchHit, std::vector<SearchHit>, decltype(worse)> heap(worse);

    const float* data = corpus_.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double dot = dot4(data + r * m, q.data(), m);
        const SearchHit hit{r, metric == Metric::InnerProduct ? dot
                                                              : qq + sq_norms_[r] - 2.0 * dot};
        if (heap.size() < n) {
            heap.push(hit);
        } else if (better(hit, heap.top())) {
            heap.pop();
            heap.push(hit);
        }
    }

    out.hits.resize(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
        out.hits[i] = heap.top();
        heap.pop();
    }
    return out;
}

namespace {

template <typename QueryFn>
double labelled_accuracy(std::size_t nq, const std::vector<std::uint32_t>& train_labels,
                         const std::vector<std::uint32_t>& query_labels, bool exclude_self,
                         std::size_t threads, QueryFn&& query_one) {
    if (nq == 0) return 0.0;
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, nq));
    std::vector<std::uint64_t> correct(nthreads, 0);
    auto work = [&](std::size_t tid, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const KnnResult res = query_one(tid, i);
            const SearchHit* best = nullptr;
            for (const auto& hit : res.hits) {
                if (exclude_self && hit.row == i) continue;
                best = &hit;
                break;
            }
            if (best && train_labels[best->row] == query_labels[i]) ++correct[tid];
        }
    };
    if (nthreads == 1) {
        work(0, 0, nq);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (nq + nthreads - 1) / nthreads;
        for (std::size_t t = 0; t < nthreads; ++t) {
            const std::size_t b = t * chunk;
            const std::size_t e = std::min(nq, b + chunk);
            if (b >= e) break;
            pool.emplace_back(work, t, b, e);
        }
        for (auto& th : pool) th.join();
    }
    std::uint64_t total = 0;
    for (std::uint64_t c : correct) total += c;
    return static_cast<double>(total) / static_cast<double>(nq);
}

}  // namespace

double one_nn_accuracy(const SparseIndex& index, const std::vector<std::uint32_t>& train_labels,
                       const SparseMatrixCSR& query_codes,
                       const std::vector<std::uint32_t>& query_labels, Metric metric,
                       bool exclude_self, std::size_t threads) {
    if (index.rows() == 0) throw std::invalid_argument("one_nn_accuracy: empty corpus");
    if (train_labels.size() != index.rows()) {
        throw std::invalid_argument("one_nn_accuracy: corpus label count mismatch");
    }
    if (query_labels.size() != query_codes.rows()) {
        throw std::invalid_argument("one_nn_accuracy: query label count mismatch");
    }
    const std::size_t need = exclude_self ? 2 : 1;
    const auto queries = query_codes.to_rows();
    std::vector<SparseIndex::Workspace> ws(std::max<std::size_t>(1, std::min(threads, queries.size())));
    return labelled_accuracy(queries.size(), train_labels, query_labels, exclude_self, threads,
                             [&](std::size_t tid, std::size_t i) {
                                 return index.knn(queries[i], need, metric, ws[tid]);
                             });
}

double one_nn_accuracy_dense(const DenseIndex& index,
                             const std::vector<std::uint32_t>& train_labels,
                             const DenseMatrix& queries,
                             const std::vector<std::uint32_t>& query_labels, Metric metric,
                             bool exclude_self, std::size_t threads) {
    if (index.rows() == 0) throw std::invalid_argument("one_nn_accuracy: empty corpus");
    if (train_labels.size() != index.rows()) {
        throw std::invalid_argument("one_nn_accuracy: corpus label count mismatch");
    }
    if (query_labels.size() != queries.rows()) {
        throw std::invalid_argument("one_nn_accuracy: query label count mismatch");
    }
    const std::size_t need = exclude_self ? 2 : 1;
    return labelled_accuracy(queries.rows(), train_labels, query_labels, exclude_self, threads,
                             [&](std::size_t, std::size_t i) {
                                 return index.knn(queries.row(i), need, metric);
                             });
}

}  // namespace csr
