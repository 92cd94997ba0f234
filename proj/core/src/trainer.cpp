#include "csr/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

namespace csr {

std::string TrainReport::to_csv() const {
    std::ostringstream out;
    out << "epoch,l_k,l_4k,l_aux,l_ncl,total,dead_fraction\n";
    char buf[192];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.l_k,
                      e.l_4k, e.l_aux, e.l_ncl, e.total, e.dead_fraction);
        out << buf;
    }
    return out.str();
}

namespace {

bool all_finite(const SaeModel& m) {
    for (float x : m.w_enc) if (!std::isfinite(x)) return false;
    for (float x : m.b_enc) if (!std::isfinite(x)) return false;
    for (float x : m.b_pre) if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

TrainResult train(const DenseMatrix& data, const std::vector<std::uint32_t>* labels,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (data.rows() < cfg.batch_size) {
        throw std::invalid_argument("train: data rows must be >= batch_size");
    }
    if (cfg.supervised && (!labels || labels->size() != data.rows())) {
        throw std::invalid_argument("train: supervised mode requires one label per data row");
    }
    const std::size_t d = data.cols();
    const std::size_t n = data.rows();

    const auto mean = data.col_mean();
    SaeModel model = init_model(d, cfg.h, cfg.seed, &mean);

    TrainReport report;
    if (cfg.epochs == 0) return {std::move(model), std::move(report)};

    DeadLatentTracker tracker(cfg.h, cfg.dead_window);
    AdamOptimizer<float> adam_w(model.w_enc.size(), cfg.lr, cfg.adam_eps);
    AdamOptimizer<float> adam_be(model.b_enc.size(), cfg.lr, cfg.adam_eps);
    AdamOptimizer<float> adam_bp(model.b_pre.size(), cfg.lr, cfg.adam_eps);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    const std::size_t steps_per_epoch = n / cfg.batch_size;  // partial batches are dropped
    DenseMatrix batch(cfg.batch_size, d);
    std::vector<std::uint32_t> batch_labels(cfg.batch_size);
    SaeModel snapshot;

    const float decay = static_cast<float>(1.0 - cfg.lr * cfg.weight_decay);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double ek = 0, e4 = 0, ea = 0, en = 0, et = 0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            for (std::size_t r = 0; r < cfg.batch_size; ++r) {
                const std::size_t src = perm[s * cfg.batch_size + r];
                std::copy_n(data.row(src).data(), d, batch.row(r).data());
                if (labels) batch_labels[r] = (*labels)[src];
            }
            const auto dead = tracker.dead_latents();
            BatchLossBreakdown bd;
            try {
                bd = batch_loss_and_grads(model, batch, labels ? &batch_labels : nullptr, cfg, dead);
            } catch (const DivergenceError& e) {
                throw TrainDiverged(e.what(), std::move(model), std::move(report));
            }

            snapshot = model;
            if (cfg.weight_decay > 0.0) {
                for (float& w : model.w_enc) w *= decay;
            }
            adam_w.step(model.w_enc, bd.grads.w_enc);
            adam_be.step(model.b_enc, bd.grads.b_enc);
            adam_bp.step(model.b_pre, bd.grads.b_pre);
            if (!all_finite(model)) {
                throw TrainDiverged("train: non-finite parameters after update", std::move(snapshot),
                                    std::move(report));
            }

            tracker.record_step(bd.active_union);
            ++report.steps;
            report.aux_evals += bd.aux_evals;
            report.ncl_evals += bd.ncl_evals;
            ek += bd.l_k;
            e4 += bd.l_4k;
            ea += bd.l_aux;
            en += bd.l_ncl;
            et += bd.total;
        }
        const double inv = steps_per_epoch > 0 ? 1.0 / static_cast<double>(steps_per_epoch) : 0.0;
        report.epochs.push_back({epoch, ek * inv, e4 * inv, ea * inv, en * inv, et * inv,
                                 tracker.dead_fraction()});
        report.final_dead_fraction = tracker.dead_fraction();
    }
    return {std::move(model), std::move(report)};
}

void checkpoint(const SaeModel& m, const std::string& path) { save_model(m, path); }

SaeModel resume(const std::string& path) { return load_model(path); }

}  // namespace csr
