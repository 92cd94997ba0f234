#include "csr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

#include "csr/io.hpp"

namespace csr {

namespace {

constexpr char kModelMagic[4] = {'C', 'S', 'R', 'M'};
constexpr std::uint32_t kModelVersion = 1;

SparseVector active_to_sparse(std::size_t h, const ActiveCode<float>& ac) {
    return SparseVector(h, ac.idx, ac.val);
}

[[maybe_unused]] bool is_subset(const std::vector<std::uint32_t>& a,
                                const std::vector<std::uint32_t>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

SparseVector encode(const SaeModel& m, std::span<const float> v, std::size_t k, OpCount* oc) {
    if (k < 1 || k > m.h) throw std::invalid_argument("encode: require 1 <= k <= h");
    const auto u = sae_centered(m, v);
    const auto a = sae_pre_activation<float>(m, u, oc);
    const auto ac = select_active<float>(a, k);
    return active_to_sparse(m.h, ac);
}

std::vector<float> decode(const SaeModel& m, const SparseVector& z, OpCount* oc) {
    if (z.dim() != m.h) throw std::invalid_argument("decode: latent dimension mismatch");
    std::vector<float> val(z.values().begin(), z.values().end());
    return sae_decode_active<float>(m, z.indices(), val, /*add_b_pre=*/true, oc);
}

ForwardCache forward(const SaeModel& m, std::span<const float> v, std::size_t k, bool compute_multi) {
    if (k < 1 || k > m.h) throw std::invalid_argument("forward: require 1 <= k <= h");
    ForwardCache fc;
    const auto u = sae_centered(m, v);
    fc.pre_activations = sae_pre_activation<float>(m, u);

    const auto ac_k = select_active<float>(fc.pre_activations, k);
    fc.selected_k = ac_k.selected;
    fc.z_k = active_to_sparse(m.h, ac_k);
    fc.recon_k = sae_decode_active<float>(m, ac_k.idx, ac_k.val, true);

    if (compute_multi) {
        const std::size_t k4 = std::min(4 * k, m.h);
        const auto ac_4k = select_active<float>(fc.pre_activations, k4);
        fc.selected_4k = ac_4k.selected;
        fc.z_4k = active_to_sparse(m.h, ac_4k);
        fc.recon_4k = sae_decode_active<float>(m, ac_4k.idx, ac_4k.val, true);
        // the fixed tie rule makes selection nested across k
        assert(is_subset(fc.selected_k, fc.selected_4k));
    }
    return fc;
}

SaeModel init_model(std::size_t d, std::size_t h, std::uint64_t seed,
                    const std::vector<float>* data_mean) {
    if (d < 1 || h < 1) throw std::invalid_argument("init_model: require d, h >= 1");
    if (data_mean && data_mean->size() != d) {
        throw std::invalid_argument("init_model: data_mean dimension mismatch");
    }
    SaeModel m(d, h);
    std::mt19937_64 rng(seed);
    const float bound = 1.0f / std::sqrt(static_cast<float>(d));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (std::size_t j = 0; j < h; ++j) {
        auto row = m.enc_row(j);
        double sq = 0.0;
        do {
            sq = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                row[i] = dist(rng);
                sq += static_cast<double>(row[i]) * static_cast<double>(row[i]);
            }
        } while (sq == 0.0);
        const float inv = static_cast<float>(1.0 / std::sqrt(sq));
        for (std::size_t i = 0; i < d; ++i) row[i] *= inv;
    }
    if (data_mean) m.b_pre = *data_mean;
    return m;
}

SparseMatrixCSR encode_rows(const SaeModel& m, const DenseMatrix& data, std::size_t k,
                            std::size_t threads) {
    if (data.cols() != m.d) throw std::invalid_argument("encode_rows: data dimension mismatch");
    std::vector<SparseVector> rows(data.rows());
    const std::size_t n = data.rows();
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, n == 0 ? 1 : n));
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) rows[i] = encode(m, data.row(i), k);
    };
    if (nthreads == 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + nthreads - 1) / nthreads;
        for (std::size_t t = 0; t < nthreads; ++t) {
            const std::size_t b = t * chunk;
            const std::size_t e = std::min(n, b + chunk);
            if (b >= e) break;
            pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return SparseMatrixCSR::from_rows(rows, m.h);
}

void save_model(const SaeModel& m, const std::string& path) {
    std::vector<std::uint8_t> out;
    out.reserve(24 + 4 * m.param_count());
    auto put = [&out](const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    };
    put(kModelMagic, 4);
    put(&kModelVersion, 4);
    const std::uint64_t d = m.d, h = m.h;
    put(&d, 8);
    put(&h, 8);
    put(m.w_enc.data(), m.w_enc.size() * 4);
    put(m.b_enc.data(), m.b_enc.size() * 4);
    put(m.b_pre.data(), m.b_pre.size() * 4);
    atomic_write_file(path, out);
}

SaeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open file");
    auto read = [&in, &path](void* p, std::size_t n) {
        in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError(path + ": truncated file");
    };
    char magic[4];
    read(magic, 4);
    if (std::memcmp(magic, kModelMagic, 4) != 0) throw FormatError(path + ": bad magic");
    std::uint32_t version;
    read(&version, 4);
    if (version != kModelVersion) throw FormatError(path + ": unsupported version");
    std::uint64_t d, h;
    read(&d, 8);
    read(&h, 8);
    if (d == 0 || h == 0 || h > (std::uint64_t(1) << 40) / std::max<std::uint64_t>(d, 1)) {
        throw FormatError(path + ": dimension overflow");
    }
    SaeModel m(static_cast<std::size_t>(d), static_cast<std::size_t>(h));
    read(m.w_enc.data(), m.w_enc.size() * 4);
    read(m.b_enc.data(), m.b_enc.size() * 4);
    read(m.b_pre.data(), m.b_pre.size() * 4);
    in.peek();
    if (!in.eof()) throw FormatError(path + ": trailing bytes after payload");
    for (float x : m.w_enc) if (!std::isfinite(x)) throw FormatError(path + ": non-finite parameter");
    for (float x : m.b_enc) if (!std::isfinite(x)) throw FormatError(path + ": non-finite parameter");
    for (float x : m.b_pre) if (!std::isfinite(x)) throw FormatError(path + ": non-finite parameter");
    return m;
}

}  // namespace csr
