#include "csr/fidelity.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "csr/objective.hpp"

namespace csr {

double recon_mse(const SaeModel& m, const DenseMatrix& data, std::size_t k) {
    if (data.cols() != m.d) throw std::invalid_argument("recon_mse: data dimension mismatch");
    if (data.rows() == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto z = encode(m, data.row(i), k);
        const auto recon = decode(m, z);
        sum += recon_loss(data.row(i), recon);
    }
    return sum / static_cast<double>(data.rows());
}

std::vector<FidelityRow> compare_fidelity(const DenseMatrix& train,
                                          const std::vector<std::uint32_t>& train_labels,
                                          const DenseMatrix& query,
                                          const std::vector<std::uint32_t>& query_labels,
                                          const SaeModel& model,
                                          const std::vector<std::size_t>& k_values,
                                          Metric metric, std::size_t threads) {
    if (train.cols() != model.d || query.cols() != model.d) {
        throw std::invalid_argument("compare_fidelity: embedding dimension mismatch");
    }
    if (train_labels.size() != train.rows() || query_labels.size() != query.rows()) {
        throw std::invalid_argument("compare_fidelity: label count mismatch");
    }

    const DenseIndex full_index(train, train.cols());
    const double full_1nn =
        one_nn_accuracy_dense(full_index, train_labels, query, query_labels, metric, false, threads);

    std::vector<FidelityRow> rows;
    rows.reserve(k_values.size());
    for (std::size_t k : k_values) {
        FidelityRow row{};
        row.active_dim = k;
        row.full_dense_1nn = full_1nn;

        const auto train_codes = encode_rows(model, train, k, threads);
        const auto query_codes = encode_rows(model, query, k, threads);
        const SparseIndex sparse_index(train_codes);
        row.sparse_1nn = one_nn_accuracy(sparse_index, train_labels, query_codes, query_labels,
                                         metric, false, threads);

        const std::size_t m_trunc = std::min(k, train.cols());
        const DenseIndex trunc_index(train, m_trunc);
        const DenseMatrix trunc_queries = query.truncate_cols(m_trunc);
        row.truncated_dense_1nn = one_nn_accuracy_dense(trunc_index, train_labels, trunc_queries,
                                                        query_labels, metric, false, threads);

        row.recon_mse = recon_mse(model, train, k);

        std::vector<std::uint8_t> used(model.h, 0);
        for (std::uint32_t j : train_codes.indices()) used[j] = 1;
        std::size_t active = 0;
        for (std::uint8_t u : used) active += u;
        row.dead_fraction = 1.0 - static_cast<double>(active) / static_cast<double>(model.h);

        rows.push_back(row);
    }
    return rows;
}

std::string fidelity_csv(const std::vector<FidelityRow>& rows) {
    std::string out = "active_dim,sparse_1nn,truncated_dense_1nn,full_dense_1nn,recon_mse,dead_fraction\n";
    char buf[192];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.active_dim,
                      r.sparse_1nn, r.truncated_dense_1nn, r.full_dense_1nn, r.recon_mse,
                      r.dead_fraction);
        out += buf;
    }
    return out;
}

}  // namespace csr
