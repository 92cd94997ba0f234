#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "csr/dense_matrix.hpp"
#include "csr/model.hpp"
#include "csr/sparse.hpp"
#include "csr/train_config.hpp"

namespace csr {

/// Signals a non-finite loss; the trainer aborts the run when it sees this.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename T>
struct LossGrads {
    std::vector<T> w_enc;  // h x d
    std::vector<T> b_enc;  // h
    std::vector<T> b_pre;  // d
};

template <typename T>
struct BatchBreakdownT {
    T l_k = T(0);    // batch mean of ||v - recon_k||^2
    T l_4k = T(0);   // batch mean at the looser sparsity level (raw, unscaled)
    T l_aux = T(0);  // batch mean of the dead-latent residual fit (raw)
    T l_ncl = T(0);  // contrastive term (raw)
    T total = T(0);  // l_k + l_4k/8 + beta*l_aux + gamma*l_ncl
    LossGrads<T> grads;  // gradients of total; empty when not requested
    std::uint64_t aux_evals = 0;  // samples for which the aux path actually ran
    std::uint64_t ncl_evals = 0;  // 1 when the contrastive path ran
    std::vector<std::uint32_t> active_union;  // union of k-branch active sets, ascending
};

using BatchLossBreakdown = BatchBreakdownT<float>;

/// Per-component weights used when assembling the total objective and its
/// gradients. The standard objective is {1, 1/8 (if multi), beta, gamma};
/// overriding lets tests and ablations isolate one term at a time.
struct ComponentScales {
    double recon_k = 1.0;
    double recon_4k = 0.125;
    double aux = 0.0;
    double ncl = 0.0;
};

/// Squared L2 distance between an input and its reconstruction.
inline double recon_loss(std::span<const float> v, std::span<const float> recon) {
    if (v.size() != recon.size()) throw std::invalid_argument("recon_loss: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double e = static_cast<double>(v[i]) - static_cast<double>(recon[i]);
        s += e * e;
    }
    return s;
}

namespace detail {

/// Top-k_aux dead latents by pre-activation (value desc, index asc), ReLU'd.
/// Returns the positive subset in ascending index order.
template <typename T>
void select_aux_code(std::span<const T> pre_act, std::span<const std::uint32_t> dead,
                     std::size_t k_aux, std::vector<std::uint32_t>& idx, std::vector<T>& val) {
    idx.clear();
    val.clear();
    if (dead.empty() || k_aux == 0) return;
    std::vector<std::uint32_t> cand(dead.begin(), dead.end());
    for (std::uint32_t j : cand) {
        if (j >= pre_act.size()) throw std::invalid_argument("aux: dead index out of range");
    }
    auto before = [&pre_act](std::uint32_t a, std::uint32_t b) {
        if (pre_act[a] != pre_act[b]) return pre_act[a] > pre_act[b];
        return a < b;
    };
    if (k_aux < cand.size()) {
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k_aux) - 1,
                         cand.end(), before);
        cand.resize(k_aux);
    }
    std::sort(cand.begin(), cand.end());
    for (std::uint32_t j : cand) {
        if (pre_act[j] > T(0)) {
            idx.push_back(j);
            val.push_back(pre_act[j]);
        }
    }
}

/// Softmax coefficients of the contrastive loss: loss value plus, when
/// requested, c[i*b+j] = dL/ds_ij (per-batch normalization folded in).
template <typename T>
double ncl_core(const std::vector<std::span<const std::uint32_t>>& idx,
                const std::vector<std::span<const T>>& val, std::size_t dim,
                const std::vector<std::uint32_t>* labels, bool supervised,
                std::vector<double>* coeff) {
    const std::size_t b = idx.size();
    if (b < 2) throw std::invalid_argument("ncl_loss: batch size must be >= 2");
    if (supervised && (!labels || labels->size() != b)) {
        throw std::invalid_argument("ncl_loss: supervised mode requires one label per sample");
    }

    // pairwise similarities s_ij = z_i . z_j via sorted-merge dots
    std::vector<double> s(b * b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = i; j < b; ++j) {
            double acc = 0.0;
            std::size_t p = 0, q = 0;
            const auto &ia = idx[i], &ib = idx[j];
            const auto &va = val[i], &vb = val[j];
            while (p < ia.size() && q < ib.size()) {
                if (ia[p] < ib[q]) ++p;
                else if (ib[q] < ia[p]) ++q;
                else {
                    acc += static_cast<double>(va[p]) * static_cast<double>(vb[q]);
                    ++p; ++q;
                }
            }
            s[i * b + j] = acc;
            s[j * b + i] = acc;
        }
    }
    (void)dim;

    if (coeff) coeff->assign(b * b, 0.0);
    double loss_sum = 0.0;

    if (!supervised) {
        for (std::size_t i = 0; i < b; ++i) {
            const double* row = s.data() + i * b;
            const double m = *std::max_element(row, row + b);
            double denom = 0.0;
            for (std::size_t j = 0; j < b; ++j) denom += std::exp(row[j] - m);
            loss_sum += std::log(denom) - (row[i] - m);
            if (coeff) {
                double* c = coeff->data() + i * b;
                for (std::size_t j = 0; j < b; ++j) c[j] = std::exp(row[j] - m) / denom / double(b);
                c[i] -= 1.0 / double(b);
            }
        }
        return loss_sum / double(b);
    }

    // supervised: numerator is the mean over same-label positives; same-label
    // terms (including self) are excluded from the negative sum
    std::size_t valid = 0;
    std::vector<std::size_t> pos, neg;
    std::vector<double> tmp_coeff;
    if (coeff) tmp_coeff.assign(b * b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        pos.clear();
        neg.clear();
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            if ((*labels)[j] == (*labels)[i]) pos.push_back(j);
            else neg.push_back(j);
        }
        if (pos.empty()) continue;  // no in-batch positive: sample is skipped
        ++valid;
        const double* row = s.data() + i * b;
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j : pos) m = std::max(m, row[j]);
        for (std::size_t j : neg) m = std::max(m, row[j]);
        double mean_pos = 0.0;
        for (std::size_t j : pos) mean_pos += std::exp(row[j] - m);
        mean_pos /= double(pos.size());
        double neg_sum = 0.0;
        for (std::size_t j : neg) neg_sum += std::exp(row[j] - m);
        loss_sum += std::log(mean_pos + neg_sum) - std::log(mean_pos);
        if (coeff) {
            double* c = tmp_coeff.data() + i * b;
            const double inv_den = 1.0 / (mean_pos + neg_sum);
            const double inv_pos = 1.0 / mean_pos;
            for (std::size_t j : pos) {
                c[j] = std::exp(row[j] - m) / double(pos.size()) * (inv_den - inv_pos);
            }
            for (std::size_t j : neg) c[j] = std::exp(row[j] - m) * inv_den;
        }
    }
    if (valid == 0) {
        if (coeff) coeff->assign(b * b, 0.0);
        return 0.0;
    }
    if (coeff) {
        for (std::size_t t = 0; t < b * b; ++t) (*coeff)[t] = tmp_coeff[t] / double(valid);
    }
    return loss_sum / double(valid);
}

template <typename T>
double dot_row_residual(const SaeParamsT<T>& p, std::uint32_t j, std::span<const double> r) {
    const T* w = p.w_enc.data() + static_cast<std::size_t>(j) * p.d;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.d; ++i) acc += static_cast<double>(w[i]) * r[i];
    return acc;
}

/// Adds w * d/dtheta ||target - (W_enc^T z + [b_pre])||^2 for one sample,
/// where (idx, val) is the code, u the centered input and residual the
/// precomputed target-minus-reconstruction.
template <typename T>
void accumulate_recon_grads(const SaeParamsT<T>& p, std::span<const std::uint32_t> idx,
                            std::span<const T> val, std::span<const T> u,
                            std::span<const double> residual, double w, bool output_has_b_pre,
                            std::vector<double>& gw, std::vector<double>& gbe,
                            std::vector<double>& gbp) {
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const std::uint32_t j = idx[t];
        const double z = static_cast<double>(val[t]);
        const T* w_row = p.w_enc.data() + static_cast<std::size_t>(j) * p.d;
        double* gw_row = gw.data() + static_cast<std::size_t>(j) * p.d;
        const double gj = -2.0 * w * dot_row_residual(p, j, residual);
        const double dec = -2.0 * w * z;  // decoder-side coefficient on residual
        gbe[j] += gj;
        for (std::size_t i = 0; i < p.d; ++i) {
            gw_row[i] += gj * static_cast<double>(u[i]) + dec * residual[i];
            gbp[i] -= gj * static_cast<double>(w_row[i]);
        }
    }
    if (output_has_b_pre) {
        for (std::size_t i = 0; i < p.d; ++i) gbp[i] += -2.0 * w * residual[i];
    }
}

/// Encoder-only path: g = dL/da_j for one sample with centered input u.
template <typename T>
void accumulate_encoder_grad(const SaeParamsT<T>& p, std::uint32_t j, double g,
                             std::span<const T> u, std::vector<double>& gw,
                             std::vector<double>& gbe, std::vector<double>& gbp) {
    const T* w_row = p.w_enc.data() + static_cast<std::size_t>(j) * p.d;
    double* gw_row = gw.data() + static_cast<std::size_t>(j) * p.d;
    gbe[j] += g;
    for (std::size_t i = 0; i < p.d; ++i) {
        gw_row[i] += g * static_cast<double>(u[i]);
        gbp[i] -= g * static_cast<double>(w_row[i]);
    }
}

}  // namespace detail

/// Contrastive loss over a batch of sparse codes (loss value only).
/// With normalize set, codes are L2-normalized before the similarities;
/// training always uses the raw form.
double ncl_loss(const std::vector<SparseVector>& z_batch,
                const std::vector<std::uint32_t>* labels = nullptr, bool supervised = false,
                bool normalize = false);

/// Residual reconstruction from the top-k_aux dead latents; zero when no
/// latent is dead. Reuses the forward pass's pre-activations and recon_k.
double aux_loss(const SaeModel& m, std::span<const float> v, const ForwardCache& fc,
                std::span<const std::uint32_t> dead, std::size_t k_aux);

/// All loss terms of the combined objective and, when requested, their
/// analytic gradients with respect to W_enc, b_enc and b_pre.
///
/// Gradients flow through TopK only via selected-and-positive coordinates;
/// the auxiliary code contributes only through its selected dead latents.
/// The tied weight picks up both the encoder term and the transpose of the
/// decoder term. Per-sample contributions are summed in a fixed order.
template <typename T>
BatchBreakdownT<T> batch_objective(const SaeParamsT<T>& p, const DenseMatrix& batch,
                                   const std::vector<std::uint32_t>* labels,
                                   const TrainConfig& cfg,
                                   const std::vector<std::uint32_t>& dead, bool want_grads,
                                   const ComponentScales* scales_override = nullptr) {
    const std::size_t bsz = batch.rows();
    if (batch.cols() != p.d) throw std::invalid_argument("batch_objective: data dimension mismatch");
    if (cfg.k < 1 || cfg.k > p.h) throw std::invalid_argument("batch_objective: require 1 <= k <= h");
    if (bsz == 0) throw std::invalid_argument("batch_objective: empty batch");

    ComponentScales sc;
    if (scales_override) {
        sc = *scales_override;
    } else {
        sc.recon_k = 1.0;
        sc.recon_4k = cfg.k_multi_enabled ? 0.125 : 0.0;
        sc.aux = cfg.beta;
        sc.ncl = cfg.gamma;
    }
    const bool do_multi = sc.recon_4k != 0.0;
    const bool do_aux = sc.aux != 0.0 && !dead.empty();
    const bool do_ncl = sc.ncl != 0.0;
    if (do_ncl && bsz < 2) {
        throw std::invalid_argument("batch_objective: batch size must be >= 2 when the contrastive term is on");
    }
    const std::size_t k4 = std::min(4 * cfg.k, p.h);

    BatchBreakdownT<T> out;
    std::vector<double> gw, gbe, gbp;
    if (want_grads) {
        gw.assign(p.h * p.d, 0.0);
        gbe.assign(p.h, 0.0);
        gbp.assign(p.d, 0.0);
    }

    const double inv_b = 1.0 / static_cast<double>(bsz);
    double l_k_sum = 0.0, l_4k_sum = 0.0, l_aux_sum = 0.0;

    // per-sample codes at sparsity k, kept for the contrastive term
    std::vector<ActiveCode<T>> codes(bsz);
    std::vector<std::uint8_t> active_mask(p.h, 0);

    std::vector<double> residual(p.d), q(p.d);
    std::vector<std::uint32_t> aux_idx;
    std::vector<T> aux_val;

    for (std::size_t s = 0; s < bsz; ++s) {
        const auto v = batch.row(s);
        const auto u = sae_centered(p, v);
        const auto a = sae_pre_activation<T>(p, std::span<const T>(u));

        codes[s] = select_active<T>(a, cfg.k);
        const auto& ck = codes[s];
        for (std::uint32_t j : ck.idx) active_mask[j] = 1;

        const auto recon_k = sae_decode_active<T>(p, ck.idx, ck.val, true);
        for (std::size_t i = 0; i < p.d; ++i) {
            residual[i] = static_cast<double>(v[i]) - static_cast<double>(recon_k[i]);
        }
        double lk = 0.0;
        for (double e : residual) lk += e * e;
        l_k_sum += lk;
        if (want_grads && sc.recon_k != 0.0) {
            detail::accumulate_recon_grads(p, ck.idx, std::span<const T>(ck.val),
                                           std::span<const T>(u), residual, sc.recon_k * inv_b,
                                           true, gw, gbe, gbp);
        }

        if (do_aux) {
            detail::select_aux_code<T>(a, dead, cfg.k_aux, aux_idx, aux_val);
            const auto e_hat = sae_decode_active<T>(p, aux_idx, aux_val, false);
            double laux = 0.0;
            for (std::size_t i = 0; i < p.d; ++i) {
                q[i] = residual[i] - static_cast<double>(e_hat[i]);
                laux += q[i] * q[i];
            }
            l_aux_sum += laux;
            ++out.aux_evals;
            if (want_grads && sc.aux != 0.0) {
                // the residual target e = v - recon_k is held constant here:
                // the aux term trains only its selected dead latents and must
                // never make the main branch yield reconstruction work to a
                // code that is absent from the actual reconstruction
                detail::accumulate_recon_grads(p, aux_idx, std::span<const T>(aux_val),
                                               std::span<const T>(u), q, sc.aux * inv_b, false, gw,
                                               gbe, gbp);
            }
        }

        if (do_multi) {
            const auto c4 = select_active<T>(a, k4);
            const auto recon_4 = sae_decode_active<T>(p, c4.idx, c4.val, true);
            double l4 = 0.0;
            for (std::size_t i = 0; i < p.d; ++i) {
                residual[i] = static_cast<double>(v[i]) - static_cast<double>(recon_4[i]);
                l4 += residual[i] * residual[i];
            }
            l_4k_sum += l4;
            if (want_grads && sc.recon_4k != 0.0) {
                detail::accumulate_recon_grads(p, c4.idx, std::span<const T>(c4.val),
                                               std::span<const T>(u), residual, sc.recon_4k * inv_b,
                                               true, gw, gbe, gbp);
            }
        }
    }

    double l_ncl = 0.0;
    if (do_ncl) {
        std::vector<std::span<const std::uint32_t>> zi(bsz);
        std::vector<std::span<const T>> zv(bsz);
        for (std::size_t s = 0; s < bsz; ++s) {
            zi[s] = codes[s].idx;
            zv[s] = codes[s].val;
        }
        std::vector<double> coeff;
        l_ncl = detail::ncl_core<T>(zi, zv, p.h, labels, cfg.supervised,
                                    want_grads ? &coeff : nullptr);
        out.ncl_evals = 1;

        if (want_grads) {
            // dL/dz_m = sum_{j != m} (c_mj + c_jm) z_j + 2 c_mm z_m, needed
            // only on the support of z_m
            std::vector<double> scratch(p.h, 0.0);
            std::vector<std::uint32_t> touched;
            for (std::size_t m = 0; m < bsz; ++m) {
                if (codes[m].idx.empty()) continue;
                touched.clear();
                for (std::size_t j = 0; j < bsz; ++j) {
                    const double w = (j == m) ? 2.0 * coeff[m * bsz + m]
                                              : coeff[m * bsz + j] + coeff[j * bsz + m];
                    if (w == 0.0) continue;
                    const auto& zj = codes[j];
                    for (std::size_t t = 0; t < zj.idx.size(); ++t) {
                        const std::uint32_t c = zj.idx[t];
                        if (scratch[c] == 0.0) touched.push_back(c);
                        scratch[c] += w * static_cast<double>(zj.val[t]);
                    }
                }
                const auto u = sae_centered(p, batch.row(m));
                for (std::uint32_t c : codes[m].idx) {
                    const double g = sc.ncl * scratch[c];
                    if (g != 0.0) {
                        detail::accumulate_encoder_grad(p, c, g, std::span<const T>(u), gw, gbe, gbp);
                    }
                }
                for (std::uint32_t c : touched) scratch[c] = 0.0;
            }
        }
    }

    out.l_k = static_cast<T>(l_k_sum * inv_b);
    out.l_4k = static_cast<T>(l_4k_sum * inv_b);
    out.l_aux = static_cast<T>(l_aux_sum * inv_b);
    out.l_ncl = static_cast<T>(l_ncl);
    const double total = sc.recon_k * (l_k_sum * inv_b) + sc.recon_4k * (l_4k_sum * inv_b) +
                         sc.aux * (l_aux_sum * inv_b) + sc.ncl * l_ncl;
    out.total = static_cast<T>(total);
    if (!std::isfinite(total)) throw DivergenceError("batch_objective: non-finite loss");

    if (want_grads) {
        out.grads.w_enc.resize(p.h * p.d);
        out.grads.b_enc.resize(p.h);
        out.grads.b_pre.resize(p.d);
        for (std::size_t i = 0; i < gw.size(); ++i) out.grads.w_enc[i] = static_cast<T>(gw[i]);
        for (std::size_t i = 0; i < gbe.size(); ++i) out.grads.b_enc[i] = static_cast<T>(gbe[i]);
        for (std::size_t i = 0; i < gbp.size(); ++i) out.grads.b_pre[i] = static_cast<T>(gbp[i]);
    }

    out.active_union.reserve(p.h);
    for (std::size_t j = 0; j < p.h; ++j) {
        if (active_mask[j]) out.active_union.push_back(static_cast<std::uint32_t>(j));
    }
    return out;
}

/// Convenience wrappers at working precision.
BatchLossBreakdown batch_loss_and_grads(const SaeModel& m, const DenseMatrix& batch,
                                        const std::vector<std::uint32_t>* labels,
                                        const TrainConfig& cfg,
                                        const std::vector<std::uint32_t>& dead);
BatchLossBreakdown batch_loss(const SaeModel& m, const DenseMatrix& batch,
                              const std::vector<std::uint32_t>* labels, const TrainConfig& cfg,
                              const std::vector<std::uint32_t>& dead);

}  // namespace csr
