#pragma once

#include <cstdint>
#include <string>

namespace csr {

inline constexpr std::uint64_t kDefaultSeed = 42;

/// All scalar hyperparameters of a training run. Defaults follow the
/// reference configuration; k, h and batch_size have no sensible default
/// and must be set before use.
struct TrainConfig {
    std::size_t k = 0;
    std::size_t h = 0;
    std::size_t k_aux = 512;
    double beta = 1.0 / 32.0;
    double gamma = 1.0;
    double lr = 4e-5;
    std::size_t epochs = 10;
    std::size_t batch_size = 0;
    double adam_eps = 6.25e-10;
    double weight_decay = 1e-4;
    std::size_t dead_window = 256;
    std::uint64_t seed = kDefaultSeed;
    bool supervised = false;
    bool k_multi_enabled = true;

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

/// Flat key=value text, one field per line. '#' starts a comment.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string serialize_train_config(const TrainConfig& cfg);

}  // namespace csr
