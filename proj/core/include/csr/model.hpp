#pragma once

#include <cassert>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csr/dense_matrix.hpp"
#include "csr/sparse.hpp"

namespace csr {

/// Tied TopK sparse autoencoder parameters. The decoder is the transpose of
/// the encoder and is never stored separately.
template <typename T>
struct SaeParamsT {
    std::size_t d = 0;  // input dim
    std::size_t h = 0;  // latent dim
    std::vector<T> w_enc;  // h x d, row-major
    std::vector<T> b_enc;  // h
    std::vector<T> b_pre;  // d

    SaeParamsT() = default;
    SaeParamsT(std::size_t d_, std::size_t h_)
        : d(d_), h(h_), w_enc(h_ * d_, T(0)), b_enc(h_, T(0)), b_pre(d_, T(0)) {}

    std::span<const T> enc_row(std::size_t j) const { return {w_enc.data() + j * d, d}; }
    std::span<T> enc_row(std::size_t j) { return {w_enc.data() + j * d, d}; }

    std::size_t param_count() const { return w_enc.size() + b_enc.size() + b_pre.size(); }
};

using SaeModel = SaeParamsT<float>;

inline SaeParamsT<double> widen(const SaeModel& m) {
    SaeParamsT<double> p(m.d, m.h);
    for (std::size_t i = 0; i < m.w_enc.size(); ++i) p.w_enc[i] = m.w_enc[i];
    for (std::size_t i = 0; i < m.b_enc.size(); ++i) p.b_enc[i] = m.b_enc[i];
    for (std::size_t i = 0; i < m.b_pre.size(); ++i) p.b_pre[i] = m.b_pre[i];
    return p;
}

inline SaeModel narrow(const SaeParamsT<double>& m) {
    SaeModel p(m.d, m.h);
    for (std::size_t i = 0; i < m.w_enc.size(); ++i) p.w_enc[i] = static_cast<float>(m.w_enc[i]);
    for (std::size_t i = 0; i < m.b_enc.size(); ++i) p.b_enc[i] = static_cast<float>(m.b_enc[i]);
    for (std::size_t i = 0; i < m.b_pre.size(); ++i) p.b_pre[i] = static_cast<float>(m.b_pre[i]);
    return p;
}

/// Multiplication counter for cost-scaling assertions.
struct OpCount {
    std::uint64_t mul = 0;
};

/// u = v - b_pre
template <typename T>
std::vector<T> sae_centered(const SaeParamsT<T>& p, std::span<const float> v) {
    if (v.size() != p.d) throw std::invalid_argument("sae_centered: input dimension mismatch");
    std::vector<T> u(p.d);
    for (std::size_t i = 0; i < p.d; ++i) u[i] = static_cast<T>(v[i]) - p.b_pre[i];
    return u;
}

/// a = W_enc u + b_enc, accumulated in 64-bit.
template <typename T>
std::vector<T> sae_pre_activation(const SaeParamsT<T>& p, std::span<const T> u, OpCount* oc = nullptr) {
    std::vector<T> a(p.h);
    const T* w = p.w_enc.data();
    for (std::size_t j = 0; j < p.h; ++j, w += p.d) {
        double acc = 0.0;
        for (std::size_t i = 0; i < p.d; ++i) acc += static_cast<double>(w[i]) * static_cast<double>(u[i]);
        a[j] = static_cast<T>(acc + static_cast<double>(p.b_enc[j]));
    }
    if (oc) oc->mul += static_cast<std::uint64_t>(p.h) * p.d;
    return a;
}

/// TopK selection followed by ReLU: the selected set plus the strictly
/// positive subset that carries values.
template <typename T>
struct ActiveCode {
    std::vector<std::uint32_t> selected;  // TopK index set, ascending
    std::vector<std::uint32_t> idx;       // selected & positive, ascending
    std::vector<T> val;                   // pre-activation values at idx
};

template <typename T>
ActiveCode<T> select_active(std::span<const T> a, std::size_t k) {
    ActiveCode<T> out;
    out.selected = top_k_select(a, k);
    out.idx.reserve(out.selected.size());
    out.val.reserve(out.selected.size());
    for (std::uint32_t j : out.selected) {
        if (a[j] > T(0)) {
            out.idx.push_back(j);
            out.val.push_back(a[j]);
        }
    }
    return out;
}

/// Σ_j val_j * enc_row(j) (+ b_pre when requested), accumulated in 64-bit.
template <typename T>
std::vector<T> sae_decode_active(const SaeParamsT<T>& p, std::span<const std::uint32_t> idx,
                                 std::span<const T> val, bool add_b_pre, OpCount* oc = nullptr) {
    std::vector<double> acc(p.d, 0.0);
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const T* w = p.w_enc.data() + static_cast<std::size_t>(idx[t]) * p.d;
        const double z = static_cast<double>(val[t]);
        for (std::size_t i = 0; i < p.d; ++i) acc[i] += z * static_cast<double>(w[i]);
    }
    if (oc) oc->mul += static_cast<std::uint64_t>(idx.size()) * p.d;
    std::vector<T> out(p.d);
    for (std::size_t i = 0; i < p.d; ++i) {
        double r = acc[i];
        if (add_b_pre) r += static_cast<double>(p.b_pre[i]);
        out[i] = static_cast<T>(r);
    }
    return out;
}

/// Per-sample forward products at sparsity k and, optionally, min(4k, h).
struct ForwardCache {
    std::vector<float> pre_activations;       // h
    std::vector<std::uint32_t> selected_k;    // ascending
    std::vector<std::uint32_t> selected_4k;   // ascending; empty unless multi
    SparseVector z_k;
    SparseVector z_4k;
    std::vector<float> recon_k;               // d
    std::vector<float> recon_4k;              // d; empty unless multi
};

SparseVector encode(const SaeModel& m, std::span<const float> v, std::size_t k, OpCount* oc = nullptr);
std::vector<float> decode(const SaeModel& m, const SparseVector& z, OpCount* oc = nullptr);
ForwardCache forward(const SaeModel& m, std::span<const float> v, std::size_t k, bool compute_multi);

/// Encoder rows drawn uniform in [-1/sqrt(d), 1/sqrt(d)] and scaled to unit
/// L2 norm; b_enc zero; b_pre set to the data mean when provided.
SaeModel init_model(std::size_t d, std::size_t h, std::uint64_t seed,
                    const std::vector<float>* data_mean = nullptr);

/// Corpus-wide encode; rows are independent, so work may be sharded.
SparseMatrixCSR encode_rows(const SaeModel& m, const DenseMatrix& data, std::size_t k,
                            std::size_t threads = 1);

void save_model(const SaeModel& m, const std::string& path);
SaeModel load_model(const std::string& path);

}  // namespace csr
