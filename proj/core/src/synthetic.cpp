#include "csr/synthetic.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace csr {

MixtureData make_gaussian_mixture(const MixtureSpec& spec) {
    if (spec.n_classes < 2) throw std::invalid_argument("mixture: need at least 2 classes");
    if (spec.low_info_prefix >= spec.d) {
        throw std::invalid_argument("mixture: low_info_prefix must be < d");
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::vector<double>> centers(spec.n_classes, std::vector<double>(spec.d, 0.0));
    for (auto& c : centers) {
        for (std::size_t i = spec.low_info_prefix; i < spec.d; ++i) c[i] = gauss(rng);
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < spec.n_classes; ++a) {
        for (std::size_t b = a + 1; b < spec.n_classes; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < spec.d; ++i) {
                const double diff = centers[a][i] - centers[b][i];
                s += diff * diff;
            }
            min_dist = std::min(min_dist, std::sqrt(s));
        }
    }
    if (!(min_dist > 0.0)) throw std::runtime_error("mixture: degenerate centers");
    const double scale = spec.separation / min_dist;
    for (auto& c : centers) {
        for (double& x : c) x *= scale;
    }

    auto fill = [&](DenseMatrix& m, std::vector<std::uint32_t>& labels, std::size_t n) {
        m = DenseMatrix(n, spec.d);
        labels.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            const std::uint32_t y = static_cast<std::uint32_t>(r % spec.n_classes);
            labels[r] = y;
            auto row = m.row(r);
            for (std::size_t i = 0; i < spec.d; ++i) {
                row[i] = static_cast<float>(centers[y][i] + gauss(rng));
            }
        }
    };

    MixtureData out;
    fill(out.train, out.train_labels, spec.n_train);
    fill(out.query, out.query_labels, spec.n_query);
    return out;
}

}  // namespace csr
