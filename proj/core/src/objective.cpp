#include "csr/objective.hpp"

namespace csr {

double ncl_loss(const std::vector<SparseVector>& z_batch, const std::vector<std::uint32_t>* labels,
                bool supervised, bool normalize) {
    if (z_batch.size() < 2) throw std::invalid_argument("ncl_loss: batch size must be >= 2");
    const std::size_t dim = z_batch.front().dim();
    for (const auto& z : z_batch) {
        if (z.dim() != dim) throw std::invalid_argument("ncl_loss: latent dimension mismatch");
    }
    std::vector<std::vector<float>> scaled;
    std::vector<std::span<const std::uint32_t>> idx(z_batch.size());
    std::vector<std::span<const float>> val(z_batch.size());
    if (normalize) scaled.resize(z_batch.size());
    for (std::size_t i = 0; i < z_batch.size(); ++i) {
        idx[i] = z_batch[i].indices();
        if (normalize) {
            const double n = std::sqrt(z_batch[i].squared_norm());
            scaled[i].assign(z_batch[i].values().begin(), z_batch[i].values().end());
            if (n > 0.0) {
                for (float& x : scaled[i]) x = static_cast<float>(x / n);
            }
            val[i] = scaled[i];
        } else {
            val[i] = z_batch[i].values();
        }
    }
    return detail::ncl_core<float>(idx, val, dim, labels, supervised, nullptr);
}

double aux_loss(const SaeModel& m, std::span<const float> v, const ForwardCache& fc,
                std::span<const std::uint32_t> dead, std::size_t k_aux) {
    if (v.size() != m.d) throw std::invalid_argument("aux_loss: input dimension mismatch");
    if (fc.pre_activations.size() != m.h || fc.recon_k.size() != m.d) {
        throw std::invalid_argument("aux_loss: forward cache does not match model");
    }
    if (dead.empty()) return 0.0;
    std::vector<std::uint32_t> idx;
    std::vector<float> val;
    detail::select_aux_code<float>(fc.pre_activations, dead, k_aux, idx, val);
    const auto e_hat = sae_decode_active<float>(m, idx, val, false);
    double s = 0.0;
    for (std::size_t i = 0; i < m.d; ++i) {
        const double e = static_cast<double>(v[i]) - static_cast<double>(fc.recon_k[i]);
        const double q = e - static_cast<double>(e_hat[i]);
        s += q * q;
    }
    return s;
}

BatchLossBreakdown batch_loss_and_grads(const SaeModel& m, const DenseMatrix& batch,
                                        const std::vector<std::uint32_t>* labels,
                                        const TrainConfig& cfg,
                                        const std::vector<std::uint32_t>& dead) {
    return batch_objective<float>(m, batch, labels, cfg, dead, /*want_grads=*/true);
}

BatchLossBreakdown batch_loss(const SaeModel& m, const DenseMatrix& batch,
                              const std::vector<std::uint32_t>* labels, const TrainConfig& cfg,
                              const std::vector<std::uint32_t>& dead) {
    return batch_objective<float>(m, batch, labels, cfg, dead, /*want_grads=*/false);
}

}  // namespace csr
