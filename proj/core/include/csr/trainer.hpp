#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csr/dense_matrix.hpp"
#include "csr/model.hpp"
#include "csr/objective.hpp"
#include "csr/train_config.hpp"

namespace csr {

/// Per-latent last-activation bookkeeping. A latent is dead iff it has not
/// fired within the last dead_window training steps. Nothing is dead before
/// one full window has elapsed.
class DeadLatentTracker {
public:
    DeadLatentTracker(std::size_t h, std::size_t dead_window)
        : window_(dead_window), last_fired_(h, 0) {}

    void record_step(std::span<const std::uint32_t> active) {
        ++current_step_;
        for (std::uint32_t j : active) last_fired_[j] = current_step_;
    }

    bool is_dead(std::size_t j) const { return current_step_ - last_fired_[j] > window_; }

    std::vector<std::uint32_t> dead_latents() const {
        std::vector<std::uint32_t> out;
        for (std::size_t j = 0; j < last_fired_.size(); ++j) {
            if (is_dead(j)) out.push_back(static_cast<std::uint32_t>(j));
        }
        return out;
    }

    double dead_fraction() const {
        if (last_fired_.empty()) return 0.0;
        std::size_t n = 0;
        for (std::size_t j = 0; j < last_fired_.size(); ++j) n += is_dead(j) ? 1 : 0;
        return static_cast<double>(n) / static_cast<double>(last_fired_.size());
    }

    std::uint64_t current_step() const { return current_step_; }
    std::size_t latent_count() const { return last_fired_.size(); }

private:
    std::size_t window_;
    std::uint64_t current_step_ = 0;
    std::vector<std::uint64_t> last_fired_;
};

/// Adam over one parameter array. Moments are stored at the parameter
/// precision; the update itself is computed in 64-bit.
template <typename T>
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n, double lr, double eps, double beta1 = 0.9, double beta2 = 0.999)
        : lr_(lr), eps_(eps), beta1_(beta1), beta2_(beta2), m_(n, T(0)), v_(n, T(0)) {}

    void step(std::span<T> params, std::span<const T> grads) {
        if (params.size() != m_.size() || grads.size() != m_.size()) {
            throw std::invalid_argument("AdamOptimizer: size mismatch");
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < m_.size(); ++i) {
            const double g = static_cast<double>(grads[i]);
            const double m = beta1_ * static_cast<double>(m_[i]) + (1.0 - beta1_) * g;
            const double v = beta2_ * static_cast<double>(v_[i]) + (1.0 - beta2_) * g * g;
            m_[i] = static_cast<T>(m);
            v_[i] = static_cast<T>(v);
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            params[i] = static_cast<T>(static_cast<double>(params[i]) -
                                       lr_ * m_hat / (std::sqrt(v_hat) + eps_));
        }
    }

    std::uint64_t steps_taken() const { return t_; }

private:
    double lr_, eps_, beta1_, beta2_;
    std::uint64_t t_ = 0;
    std::vector<T> m_, v_;
};

struct EpochRecord {
    std::size_t epoch;
    double l_k, l_4k, l_aux, l_ncl, total;
    double dead_fraction;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::uint64_t steps = 0;
    std::uint64_t aux_evals = 0;
    std::uint64_t ncl_evals = 0;
    double final_dead_fraction = 0.0;

    /// Line-delimited records with a header row.
    std::string to_csv() const;
};

struct TrainResult {
    SaeModel model;
    TrainReport report;
};

/// Raised when a training step produces a non-finite loss or parameters;
/// carries the last set of finite parameters.
class TrainDiverged : public DivergenceError {
public:
    TrainDiverged(const std::string& msg, SaeModel last_good, TrainReport partial)
        : DivergenceError(msg), last_good_model(std::move(last_good)),
          partial_report(std::move(partial)) {}

    SaeModel last_good_model;
    TrainReport partial_report;
};

/// Full training loop: seeded per-epoch shuffling, Adam updates with
/// decoupled weight decay on W_enc, dead-latent tracking. Deterministic for
/// a fixed (data, labels, cfg).
TrainResult train(const DenseMatrix& data, const std::vector<std::uint32_t>* labels,
                  const TrainConfig& cfg);

/// Checkpoint round-trip; resume produces a model that encodes identically.
void checkpoint(const SaeModel& m, const std::string& path);
SaeModel resume(const std::string& path);

}  // namespace csr
