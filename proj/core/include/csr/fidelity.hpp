#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csr/dense_matrix.hpp"
#include "csr/index.hpp"
#include "csr/model.hpp"

namespace csr {

struct FidelityRow {
    std::size_t active_dim;
    double sparse_1nn;
    double truncated_dense_1nn;
    double full_dense_1nn;
    double recon_mse;       // over the corpus at this sparsity
    double dead_fraction;   // latents never used by any corpus code at this sparsity
};

/// Mean reconstruction error of the model over a dataset at sparsity k.
double recon_mse(const SaeModel& m, const DenseMatrix& data, std::size_t k);

/// Side-by-side 1-NN accuracy of sparse codes, first-k truncated dense
/// embeddings and full dense embeddings, for each requested sparsity level.
std::vector<FidelityRow> compare_fidelity(const DenseMatrix& train,
                                          const std::vector<std::uint32_t>& train_labels,
                                          const DenseMatrix& query,
                                          const std::vector<std::uint32_t>& query_labels,
                                          const SaeModel& model,
                                          const std::vector<std::size_t>& k_values,
                                          Metric metric = Metric::L2, std::size_t threads = 1);

/// Fixed field order: active_dim,sparse_1nn,truncated_dense_1nn,
/// full_dense_1nn,recon_mse,dead_fraction
std::string fidelity_csv(const std::vector<FidelityRow>& rows);

}  // namespace csr
