#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "csr/bench.hpp"
#include "csr/fidelity.hpp"
#include "csr/io.hpp"
#include "csr/objective.hpp"
#include "csr/synthetic.hpp"
#include "csr/trainer.hpp"

using namespace csr;

namespace {

std::vector<std::vector<double>> parse_csv_numbers(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("run_bench reports exact dense multiplication counts") {
    BenchProtocol proto;
    proto.query_batch = 512;
    proto.rounds = 1;
    proto.warmup = 0;
    BenchParams params;
    params.active_dim = 8;
    params.db_size = 1000;
    const auto r = run_bench(IndexKind::Dense, params, proto);
    CHECK(r.total_mults == 512ull * 1000ull * 8ull);
    CHECK(r.mean_latency > 0.0);
    CHECK(r.relative_time == 1.0);
}

TEST_CASE("run_bench sparse counts track the uniform-overlap model") {
    BenchProtocol proto;
    proto.query_batch = 256;
    proto.rounds = 1;
    proto.warmup = 0;
    BenchParams params;
    params.active_dim = 4;
    params.h = 2048;
    params.db_size = 50000;
    const auto r = run_bench(IndexKind::Sparse, params, proto);
    const double predicted = 256.0 * 50000.0 * 16.0 / 2048.0;
    CHECK(double(r.total_mults) > 0.9 * predicted);
    CHECK(double(r.total_mults) < 1.1 * predicted);
}

TEST_CASE("sparse mult counts are reproducible for a fixed seed") {
    BenchProtocol proto;
    proto.query_batch = 64;
    proto.rounds = 2;
    proto.warmup = 1;
    proto.seed = 777;
    BenchParams params;
    params.active_dim = 4;
    params.h = 512;
    params.db_size = 5000;
    const auto a = run_bench(IndexKind::Sparse, params, proto);
    proto.threads = 3;
    const auto b = run_bench(IndexKind::Sparse, params, proto);
    CHECK(a.total_mults == b.total_mults);
}

TEST_CASE("dense benchmark refuses allocations beyond the budget") {
    BenchProtocol proto;
    proto.dense_budget_bytes = 1 << 20;  // 1 MiB
    BenchParams params;
    params.active_dim = 2048;
    params.db_size = 100000;  // ~819 MB
    CHECK_THROWS_AS(run_bench(IndexKind::Dense, params, proto), std::invalid_argument);
}

TEST_CASE("recon_mse") {
    SUBCASE("perfect identity model reconstructs its range exactly") {
        SaeModel m(3, 3);
        m.w_enc = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        DenseMatrix data(4, 3);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<float> pos(0.1f, 2.0f);
        for (auto& x : data.data()) x = pos(rng);
        CHECK(recon_mse(m, data, 3) == 0.0);
    }

    SUBCASE("matches the objective's l_k on an identical batch") {
        MixtureSpec spec;
        spec.d = 8;
        spec.n_train = 16;
        spec.n_query = 4;
        spec.n_classes = 4;
        const auto data = make_gaussian_mixture(spec);
        const auto m = init_model(8, 32, 9);

        TrainConfig cfg;
        cfg.k = 4;
        cfg.h = 32;
        cfg.batch_size = 16;
        cfg.beta = 0.0;
        cfg.gamma = 0.0;
        cfg.k_multi_enabled = false;
        const auto bd = batch_loss(m, data.train, nullptr, cfg, {});
        CHECK(recon_mse(m, data.train, 4) == doctest::Approx(double(bd.l_k)).epsilon(1e-6));
    }

    SUBCASE("a trained model reconstructs better at k=h than at k=1") {
        MixtureSpec spec;
        spec.d = 8;
        spec.n_train = 128;
        spec.n_query = 8;
        spec.n_classes = 4;
        const auto data = make_gaussian_mixture(spec);

        TrainConfig cfg;
        cfg.k = 4;
        cfg.h = 16;
        cfg.batch_size = 16;
        cfg.lr = 3e-3;
        cfg.epochs = 20;
        cfg.gamma = 0.0;
        const auto res = train(data.train, nullptr, cfg);
        CHECK(recon_mse(res.model, data.train, cfg.h) < recon_mse(res.model, data.train, 1));
    }
}

TEST_CASE("compare_fidelity") {
    SUBCASE("identity-like perfect autoencoder matches full dense accuracy at k=d") {
        const std::size_t d = 6;
        SaeModel m(d, d);
        for (std::size_t i = 0; i < d; ++i) m.w_enc[i * d + i] = 1.0f;

        // strictly positive embeddings keep the ReLU transparent
        MixtureSpec spec;
        spec.d = d;
        spec.n_train = 120;
        spec.n_query = 40;
        spec.n_classes = 4;
        spec.separation = 6.0;
        auto data = make_gaussian_mixture(spec);
        for (auto& x : data.train.data()) x = std::abs(x) + 0.1f;
        for (auto& x : data.query.data()) x = std::abs(x) + 0.1f;

        const auto rows = compare_fidelity(data.train, data.train_labels, data.query,
                                           data.query_labels, m, {d});
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].sparse_1nn == rows[0].full_dense_1nn);
        CHECK(rows[0].recon_mse == 0.0);
        CHECK(rows[0].active_dim == d);
    }

    SUBCASE("sparse accuracy is non-decreasing in k and beats truncation on anisotropic data") {
        MixtureSpec spec;
        spec.d = 16;
        spec.n_train = 600;
        spec.n_query = 200;
        spec.n_classes = 5;
        spec.separation = 6.0;
        spec.low_info_prefix = 6;  // first coordinates carry no class signal
        spec.seed = 12;
        const auto data = make_gaussian_mixture(spec);

        TrainConfig cfg;
        cfg.k = 4;
        cfg.h = 64;
        cfg.batch_size = 32;
        cfg.lr = 2e-3;
        cfg.epochs = 15;
        cfg.gamma = 0.1;
        const auto res = train(data.train, &data.train_labels, cfg);

        const auto rows = compare_fidelity(data.train, data.train_labels, data.query,
                                           data.query_labels, res.model, {2, 4, 8});
        REQUIRE(rows.size() == 3);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            CHECK(rows[i].sparse_1nn >= rows[i - 1].sparse_1nn - 0.02);
        }
        CHECK(rows[0].sparse_1nn > rows[0].truncated_dense_1nn);
        for (const auto& r : rows) {
            CHECK(r.full_dense_1nn == rows[0].full_dense_1nn);
            CHECK(r.dead_fraction >= 0.0);
            CHECK(r.dead_fraction <= 1.0);
        }
    }
}

TEST_CASE("eval fixture reproduces the committed reference table") {
    const std::string dir = CSR_FIXTURE_DIR;
    const auto train_data = load_dense(dir + "/train.bin");
    const auto query_data = load_dense(dir + "/query.bin");
    const auto train_labels = load_labels(dir + "/train_labels.bin");
    const auto query_labels = load_labels(dir + "/query_labels.bin");
    const auto model = load_model(dir + "/model.bin");

    const auto rows = compare_fidelity(train_data, train_labels, query_data, query_labels, model,
                                       {2, 4, 8});
    const auto got = parse_csv_numbers(fidelity_csv(rows));

    std::ifstream ref_file(dir + "/reference_eval.csv");
    REQUIRE(ref_file.good());
    std::stringstream buf;
    buf << ref_file.rdbuf();
    const auto expect = parse_csv_numbers(buf.str());

    REQUIRE(got.size() == expect.size());
    for (std::size_t r = 0; r < expect.size(); ++r) {
        REQUIRE(got[r].size() == expect[r].size());
        for (std::size_t c = 0; c < expect[r].size(); ++c) {
            CHECK(got[r][c] == doctest::Approx(expect[r][c]).epsilon(1e-6).scale(1.0));
        }
    }
}
