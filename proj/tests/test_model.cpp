#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "csr/io.hpp"
#include "csr/model.hpp"
#include "support/oracles.hpp"

using namespace csr;

namespace {

SaeModel identity_model(std::size_t d) {
    SaeModel m(d, d);
    for (std::size_t i = 0; i < d; ++i) m.w_enc[i * d + i] = 1.0f;
    return m;
}

std::filesystem::path temp_path(const char* tag) {
    static std::mt19937_64 rng(std::random_device{}());
    return std::filesystem::temp_directory_path() /
           ("csr_model_" + std::string(tag) + "_" + std::to_string(rng()) + ".bin");
}

}  // namespace

TEST_CASE("encode with identity weights keeps the top-k positives") {
    const auto m = identity_model(3);
    const std::vector<float> v{1.0f, -2.0f, 3.0f};
    const auto z = encode(m, v, 2);
    CHECK(z.indices() == std::vector<std::uint32_t>{0, 2});
    CHECK(z.values() == std::vector<float>{1.0f, 3.0f});

    const std::vector<float> neg{-1.0f, -2.0f, -3.0f};
    CHECK(encode(m, neg, 2).nnz() == 0);  // TopK selects, ReLU zeroes everything

    CHECK_THROWS_AS(encode(m, v, 0), std::invalid_argument);
    CHECK_THROWS_AS(encode(m, v, 4), std::invalid_argument);
    CHECK_THROWS_AS(encode(m, std::vector<float>{1.0f}, 1), std::invalid_argument);
}

TEST_CASE("encode at k=h equals ReLU of the full pre-activation") {
    std::mt19937_64 rng(5);
    const std::size_t d = 12, h = 20;
    auto m = init_model(d, h, 99);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (auto& b : m.b_enc) b = dist(rng);
    for (auto& b : m.b_pre) b = dist(rng);

    std::vector<float> v(d);
    for (auto& x : v) x = dist(rng);

    const auto z = encode(m, v, h).densify();
    const auto u = sae_centered(m, v);
    const auto a = sae_pre_activation<float>(m, u);
    for (std::size_t j = 0; j < h; ++j) {
        CHECK(z[j] == std::max(a[j], 0.0f));
    }
}

TEST_CASE("decode is b_pre plus the active decoder columns") {
    auto m = identity_model(3);
    m.b_pre = {0.5f, -0.5f, 1.0f};
    CHECK(decode(m, SparseVector(3)) == m.b_pre);

    m.b_pre = {0.0f, 0.0f, 0.0f};
    const auto out = decode(m, SparseVector(3, {1}, {2.0f}));
    CHECK(out == std::vector<float>{0.0f, 2.0f, 0.0f});

    CHECK_THROWS_AS(decode(m, SparseVector(5, {1}, {2.0f})), std::invalid_argument);
}

TEST_CASE("decode matches the densified matmul oracle") {
    std::mt19937_64 rng(7);
    const std::size_t d = 16, h = 40;
    const auto m = init_model(d, h, 123);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::uint32_t> idx;
        std::vector<float> val;
        for (std::uint32_t j = 0; j < h; ++j) {
            if (rng() % 4 == 0) {
                idx.push_back(j);
                val.push_back(0.1f + static_cast<float>(rng() % 100) / 50.0f);
            }
        }
        const SparseVector z(h, idx, val);
        const auto out = decode(m, z);
        const auto dz = z.densify();
        for (std::size_t i = 0; i < d; ++i) {
            double expect = m.b_pre[i];
            for (std::size_t j = 0; j < h; ++j) {
                expect += static_cast<double>(dz[j]) * static_cast<double>(m.w_enc[j * d + i]);
            }
            CHECK(std::abs(out[i] - expect) < 1e-5);
        }
    }
}

TEST_CASE("forward fills the cache consistently") {
    std::mt19937_64 rng(9);
    const std::size_t d = 10, h = 32, k = 4;
    const auto m = init_model(d, h, 321);
    std::vector<float> v(d);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (auto& x : v) x = dist(rng);

    SUBCASE("compute_multi=false leaves 4k fields empty") {
        const auto fc = forward(m, v, k, false);
        CHECK(fc.selected_4k.empty());
        CHECK(fc.z_4k.nnz() == 0);
        CHECK(fc.recon_4k.empty());
        CHECK(fc.selected_k.size() == k);
    }

    SUBCASE("4k clamps to h") {
        const auto fc = forward(m, v, 10, true);  // 4k = 40 > h = 32
        CHECK(fc.selected_4k.size() == h);
    }

    SUBCASE("cache equals independent recomputation") {
        const auto fc = forward(m, v, k, true);
        const auto z = encode(m, v, k);
        CHECK(fc.z_k == z);
        CHECK(fc.recon_k == decode(m, z));
        const auto z4 = encode(m, v, 4 * k);
        CHECK(fc.z_4k == z4);
        CHECK(fc.recon_4k == decode(m, z4));

        const auto u = sae_centered(m, v);
        CHECK(fc.pre_activations == sae_pre_activation<float>(m, u));
    }
}

TEST_CASE("top-k selection is nested within top-4k") {
    std::mt19937_64 rng(31);
    const std::size_t d = 8, h = 24;
    const auto m = init_model(d, h, 77);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> v(d);
        for (auto& x : v) x = dist(rng);
        const std::size_t k = 1 + rng() % 6;
        const auto fc = forward(m, v, k, true);
        CHECK(std::includes(fc.selected_4k.begin(), fc.selected_4k.end(), fc.selected_k.begin(),
                            fc.selected_k.end()));
    }
}

TEST_CASE("encode output never exceeds k strictly positive entries") {
    std::mt19937_64 rng(37);
    const std::size_t d = 9, h = 40;
    const auto m = init_model(d, h, 13);
    std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<float> v(d);
        for (auto& x : v) x = dist(rng);
        const std::size_t k = 1 + rng() % h;
        const auto z = encode(m, v, k);
        CHECK(z.nnz() <= k);
        for (float val : z.values()) CHECK(val > 0.0f);
    }
}

TEST_CASE("init_model draws unit-norm rows deterministically") {
    const auto m = init_model(24, 64, 4242);
    for (std::size_t j = 0; j < m.h; ++j) {
        double sq = 0.0;
        for (std::size_t i = 0; i < m.d; ++i) {
            sq += static_cast<double>(m.w_enc[j * m.d + i]) * m.w_enc[j * m.d + i];
        }
        CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-6);
    }
    for (float b : m.b_enc) CHECK(b == 0.0f);
    for (float b : m.b_pre) CHECK(b == 0.0f);

    const auto m2 = init_model(24, 64, 4242);
    CHECK(m2.w_enc == m.w_enc);

    const auto scalar = init_model(1, 1, 5);
    CHECK(std::abs(scalar.w_enc[0]) == 1.0f);

    const std::vector<float> mean{1.0f, 2.0f};
    const auto with_mean = init_model(2, 4, 5, &mean);
    CHECK(with_mean.b_pre == mean);
    CHECK_THROWS_AS(init_model(3, 4, 5, &mean), std::invalid_argument);
}

TEST_CASE("orthonormal encoder with k=h recovers positive-span inputs") {
    // rows of a random rotation: W W^T = I, so decode(encode(v)) = v when
    // v = W^T c with c > 0
    std::mt19937_64 rng(41);
    const std::size_t d = 8;
    SaeParamsT<double> wd(d, d);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        auto row = wd.enc_row(j);
        for (std::size_t i = 0; i < d; ++i) row[i] = gauss(rng);
        for (std::size_t prev = 0; prev < j; ++prev) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += row[i] * wd.w_enc[prev * d + i];
            for (std::size_t i = 0; i < d; ++i) row[i] -= dot * wd.w_enc[prev * d + i];
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) sq += row[i] * row[i];
        for (std::size_t i = 0; i < d; ++i) row[i] /= std::sqrt(sq);
    }
    const SaeModel m = narrow(wd);

    std::uniform_real_distribution<double> pos(0.2, 1.5);
    std::vector<double> c(d);
    for (auto& x : c) x = pos(rng);
    std::vector<float> v(d, 0.0f);
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += wd.w_enc[j * d + i] * c[j];
        v[i] = static_cast<float>(s);
    }

    const auto recon = decode(m, encode(m, v, d));
    for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(recon[i] - v[i]) < 1e-5);
}

TEST_CASE("operation counters scale as h*d for encode and nnz*d for decode") {
    const std::size_t d = 10, h = 50;
    const auto m = init_model(d, h, 3);
    std::vector<float> v(d, 0.3f);

    OpCount enc_count;
    const auto z = encode(m, v, 7, &enc_count);
    CHECK(enc_count.mul == static_cast<std::uint64_t>(h) * d);

    OpCount dec_count;
    decode(m, z, &dec_count);
    CHECK(dec_count.mul == static_cast<std::uint64_t>(z.nnz()) * d);
}

TEST_CASE("model checkpoints round-trip bit-exactly") {
    const auto m = init_model(6, 14, 2024);
    const auto path = temp_path("ckpt");
    save_model(m, path.string());
    const auto back = load_model(path.string());
    CHECK(back.w_enc == m.w_enc);
    CHECK(back.b_enc == m.b_enc);
    CHECK(back.b_pre == m.b_pre);

    SUBCASE("truncation is detected") {
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
        CHECK_THROWS_AS(load_model(path.string()), FormatError);
    }
    std::filesystem::remove(path);
}

TEST_CASE("encode_rows is independent of the thread count") {
    std::mt19937_64 rng(55);
    const std::size_t d = 8, h = 24;
    const auto m = init_model(d, h, 8);
    DenseMatrix data(37, d);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    for (auto& x : data.data()) x = dist(rng);

    const auto one = encode_rows(m, data, 5, 1);
    const auto many = encode_rows(m, data, 5, 4);
    CHECK(one == many);
}
