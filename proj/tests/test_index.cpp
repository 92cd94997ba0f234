#include <doctest.h>

#include <algorithm>
#include <random>

#include "csr/bench.hpp"
#include "csr/index.hpp"
#include "support/oracles.hpp"

using namespace csr;

namespace {

std::vector<std::vector<float>> densify_rows(const SparseMatrixCSR& m) {
    std::vector<std::vector<float>> out;
    for (const auto& r : m.to_rows()) out.push_back(r.densify());
    return out;
}

void check_rank_agreement(const KnnResult& got, const std::vector<SearchHit>& expect) {
    REQUIRE(got.hits.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(got.hits[i].row == expect[i].row);
    }
}

}  // namespace

TEST_CASE("empty and single-row corpora") {
    const SparseMatrixCSR empty(0, 16, {0}, {}, {});
    const SparseIndex idx(empty);
    const auto res = idx.knn(SparseVector(16, {2}, {1.0f}), 3, Metric::L2);
    CHECK(res.hits.empty());
    CHECK(res.mult_count == 0);

    const auto row = SparseVector(16, {2, 5}, {1.0f, 2.0f});
    const SparseIndex one(SparseMatrixCSR::from_rows({row}, 16));
    const auto r2 = one.knn(SparseVector(16, {5}, {1.0f}), 4, Metric::InnerProduct);
    REQUIRE(r2.hits.size() == 1);
    CHECK(r2.hits[0].row == 0);
    CHECK(r2.hits[0].score == doctest::Approx(2.0));
}

TEST_CASE("posting lists partition the corpus nonzeros") {
    std::mt19937_64 rng(3);
    const auto corpus = synth_sparse_corpus(500, 64, 6, rng);
    const SparseIndex idx(corpus);
    std::size_t total = 0;
    for (std::size_t j = 0; j < corpus.cols(); ++j) total += idx.posting_count(j);
    CHECK(total == corpus.nnz());

    SUBCASE("norms match a recount") {
        const auto rows = corpus.to_rows();
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double expect = 0.0;
            for (float v : rows[r].values()) expect += double(v) * double(v);
            CHECK(idx.sq_norms()[r] ==
                  doctest::Approx(expect).epsilon(1e-5));
        }
    }
}

TEST_CASE("self-query returns exact zero distance at rank one") {
    std::mt19937_64 rng(5);
    const auto corpus = synth_sparse_corpus(100, 64, 8, rng);
    const SparseIndex idx(corpus);
    const auto rows = corpus.to_rows();
    for (std::size_t r : {0u, 17u, 99u}) {
        const auto res = idx.knn(rows[r], 1, Metric::L2);
        REQUIRE(res.hits.size() == 1);
        CHECK(res.hits[0].row == r);
        CHECK(res.hits[0].score == 0.0);
    }
}

TEST_CASE("empty-support query ranks by the tie rule") {
    std::mt19937_64 rng(7);
    const auto corpus = synth_sparse_corpus(50, 32, 4, rng);
    const SparseIndex idx(corpus);
    const auto res = idx.knn(SparseVector(32), 1, Metric::InnerProduct);
    REQUIRE(res.hits.size() == 1);
    CHECK(res.hits[0].row == 0);  // all scores zero, lowest id wins
    CHECK(res.hits[0].score == 0.0);
    CHECK(res.mult_count == 0);
}

TEST_CASE("knn matches the densified exhaustive oracle rank for rank") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t h = trial % 2 == 0 ? 64 : 128;
        const std::size_t k = 4 + (trial % 2) * 4;
        const auto corpus = synth_sparse_corpus(200, h, k, rng);
        const auto dense = densify_rows(corpus);
        const auto queries = synth_sparse_corpus(20, h, k, rng).to_rows();

        SparseIndex idx(corpus);
        SparseIndex::Workspace ws;
        for (const auto& q : queries) {
            const auto dq = q.densify();
            for (Metric metric : {Metric::L2, Metric::InnerProduct}) {
                const auto got = idx.knn(q, 10, metric, ws);
                const auto expect = oracle::knn_dense_scan(dense, dq, 10, metric);
                check_rank_agreement(got, expect);
            }
        }
    }
}

TEST_CASE("mult_count is the touched posting total and is monotone in the query support") {
    std::mt19937_64 rng(13);
    const auto corpus = synth_sparse_corpus(300, 48, 5, rng);
    const SparseIndex idx(corpus);
    const auto q = synth_sparse_corpus(1, 48, 8, rng).to_rows()[0];

    std::uint64_t expect = 0;
    for (std::uint32_t j : q.indices()) expect += idx.posting_count(j);
    const auto res = idx.knn(q, 5, Metric::L2);
    CHECK(res.mult_count == expect);

    // dropping any nonzero never increases the count
    for (std::size_t drop = 0; drop < q.nnz(); ++drop) {
        std::vector<std::uint32_t> di;
        std::vector<float> dv;
        for (std::size_t t = 0; t < q.nnz(); ++t) {
            if (t == drop) continue;
            di.push_back(q.indices()[t]);
            dv.push_back(q.values()[t]);
        }
        const auto sub = idx.knn(SparseVector(48, di, dv), 5, Metric::L2);
        CHECK(sub.mult_count <= res.mult_count);
    }
}

TEST_CASE("L2 and inner-product rankings coincide for equal-norm corpora") {
    std::mt19937_64 rng(17);
    // identical value multisets make the row norms exactly equal
    const std::size_t h = 40, k = 5, n = 120;
    std::vector<SparseVector> rows;
    for (std::size_t r = 0; r < n; ++r) {
        auto support = synth_sparse_corpus(1, h, k, rng).to_rows()[0].indices();
        rows.emplace_back(h, support, std::vector<float>(k, 0.5f));
    }
    const SparseIndex idx(SparseMatrixCSR::from_rows(rows, h));
    const auto queries = synth_sparse_corpus(15, h, k, rng).to_rows();
    for (const auto& q : queries) {
        const auto by_l2 = idx.knn(q, n, Metric::L2);
        const auto by_ip = idx.knn(q, n, Metric::InnerProduct);
        REQUIRE(by_l2.hits.size() == by_ip.hits.size());
        for (std::size_t i = 0; i < by_l2.hits.size(); ++i) {
            CHECK(by_l2.hits[i].row == by_ip.hits[i].row);
        }
    }
}

TEST_CASE("dense index scans exhaustively") {
    std::mt19937_64 rng(19);
    const auto emb = synth_dense_matrix(200, 24, rng);
    const DenseIndex idx(emb, 24);

    SUBCASE("self-query has rank-1 distance zero") {
        for (std::size_t r : {0u, 42u, 199u}) {
            std::vector<float> q(emb.row(r).begin(), emb.row(r).end());
            const auto res = idx.knn(q, 1, Metric::L2);
            CHECK(res.hits[0].row == r);
            CHECK(res.hits[0].score == 0.0);
        }
    }

    SUBCASE("mult count is rows*m by definition") {
        std::vector<float> q(24, 0.1f);
        CHECK(idx.knn(q, 1, Metric::L2).mult_count == 200u * 24u);
        const DenseIndex trunc(emb, 8);
        std::vector<float> q8(8, 0.1f);
        CHECK(trunc.knn(q8, 1, Metric::L2).mult_count == 200u * 8u);
    }

    SUBCASE("agrees with the scalar-loop oracle") {
        std::vector<std::vector<float>> dense;
        for (std::size_t r = 0; r < emb.rows(); ++r) {
            dense.emplace_back(emb.row(r).begin(), emb.row(r).end());
        }
        for (int t = 0; t < 10; ++t) {
            std::vector<float> q(24);
            std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
            for (auto& x : q) x = dist(rng);
            for (Metric metric : {Metric::L2, Metric::InnerProduct}) {
                const auto got = idx.knn(q, 7, metric);
                const auto expect = oracle::knn_dense_scan(dense, q, 7, metric);
                check_rank_agreement(got, expect);
            }
        }
    }

    SUBCASE("n larger than the corpus returns all rows") {
        std::vector<float> q(24, 0.2f);
        CHECK(idx.knn(q, 1000, Metric::L2).hits.size() == 200);
    }
}

TEST_CASE("one_nn_accuracy") {
    std::mt19937_64 rng(23);

    SUBCASE("self-exclusion with all-distinct labels scores zero") {
        const auto corpus = synth_sparse_corpus(20, 32, 4, rng);
        std::vector<std::uint32_t> labels(20);
        std::iota(labels.begin(), labels.end(), 0u);
        const SparseIndex idx(corpus);
        CHECK(one_nn_accuracy(idx, labels, corpus, labels, Metric::L2, true) == 0.0);
        CHECK(one_nn_accuracy(idx, labels, corpus, labels, Metric::L2, false) == 1.0);
    }

    SUBCASE("well-separated clusters score one") {
        // cluster c occupies its own coordinate block with large values
        std::vector<SparseVector> rows;
        std::vector<std::uint32_t> labels;
        for (std::size_t r = 0; r < 40; ++r) {
            const std::uint32_t c = r % 2;
            rows.emplace_back(16, std::vector<std::uint32_t>{c * 8, c * 8 + 1},
                              std::vector<float>{5.0f + (r % 3) * 0.1f, 5.0f});
            labels.push_back(c);
        }
        const auto codes = SparseMatrixCSR::from_rows(rows, 16);
        const SparseIndex idx(codes);
        CHECK(one_nn_accuracy(idx, labels, codes, labels, Metric::L2, true) == 1.0);
    }

    SUBCASE("matches an exhaustive oracle on random data") {
        const auto corpus = synth_sparse_corpus(60, 32, 5, rng);
        const auto queries = synth_sparse_corpus(25, 32, 5, rng);
        std::vector<std::uint32_t> train_labels(60), query_labels(25);
        for (auto& y : train_labels) y = rng() % 3;
        for (auto& y : query_labels) y = rng() % 3;

        const SparseIndex idx(corpus);
        const double got =
            one_nn_accuracy(idx, train_labels, queries, query_labels, Metric::L2, false, 2);

        const auto dense = densify_rows(corpus);
        std::size_t correct = 0;
        const auto qrows = queries.to_rows();
        for (std::size_t i = 0; i < qrows.size(); ++i) {
            const auto expect = oracle::knn_dense_scan(dense, qrows[i].densify(), 1, Metric::L2);
            if (train_labels[expect[0].row] == query_labels[i]) ++correct;
        }
        CHECK(got == doctest::Approx(double(correct) / 25.0));
    }

    SUBCASE("empty corpus is an error") {
        const SparseMatrixCSR empty(0, 8, {0}, {}, {});
        const SparseIndex idx(empty);
        const auto q = synth_sparse_corpus(1, 8, 2, rng);
        CHECK_THROWS_AS(one_nn_accuracy(idx, {}, q, {0}, Metric::L2), std::invalid_argument);
    }
}

TEST_CASE("expected-overlap law: mean mult_count tracks N*k^2/h") {
    std::mt19937_64 rng(29);
    const std::size_t n = 100000, h = 1024, k = 8;
    const auto corpus = synth_sparse_corpus(n, h, k, rng);
    const SparseIndex idx(corpus);
    const auto queries = synth_sparse_corpus(50, h, k, rng).to_rows();

    SparseIndex::Workspace ws;
    double total = 0.0;
    for (const auto& q : queries) total += double(idx.knn(q, 1, Metric::L2, ws).mult_count);
    const double mean = total / double(queries.size());
    const double predicted = double(n) * k * k / double(h);
    CHECK(mean > 0.9 * predicted);
    CHECK(mean < 1.1 * predicted);
}

TEST_CASE("knn input validation") {
    std::mt19937_64 rng(31);
    const auto corpus = synth_sparse_corpus(10, 16, 3, rng);
    const SparseIndex idx(corpus);
    CHECK_THROWS_AS(idx.knn(SparseVector(8), 1, Metric::L2), std::invalid_argument);
    CHECK_THROWS_AS(idx.knn(SparseVector(16), 0, Metric::L2), std::invalid_argument);
}
