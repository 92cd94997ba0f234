#pragma once

#include <cstdint>
#include <vector>

#include "csr/dense_matrix.hpp"
#include "csr/train_config.hpp"

namespace csr {

/// Labelled Gaussian-mixture embeddings with unit per-coordinate noise and
/// centers rescaled so the minimum pairwise center distance equals
/// `separation`. Setting low_info_prefix zeroes the first coordinates of all
/// centers, so prefix truncation sees pure noise there.
struct MixtureSpec {
    std::size_t n_classes = 10;
    std::size_t d = 64;
    std::size_t n_train = 5000;
    std::size_t n_query = 1000;
    double separation = 4.0;
    std::size_t low_info_prefix = 0;
    std::uint64_t seed = kDefaultSeed;
};

struct MixtureData {
    DenseMatrix train;
    DenseMatrix query;
    std::vector<std::uint32_t> train_labels;
    std::vector<std::uint32_t> query_labels;
};

MixtureData make_gaussian_mixture(const MixtureSpec& spec);

}  // namespace csr
