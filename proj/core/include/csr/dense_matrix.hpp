#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace csr {

/// Row-major matrix of 32-bit floats. Rows are samples, columns are
/// embedding coordinates.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw std::invalid_argument("DenseMatrix: data length does not equal rows*cols");
        }
        check_finite();
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<float> row(std::size_t i) {
        return {data_.data() + i * cols_, cols_};
    }

    float operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    float& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    /// First m columns of every row, as a new matrix.
    DenseMatrix truncate_cols(std::size_t m) const {
        if (m > cols_) throw std::invalid_argument("truncate_cols: m exceeds cols");
        DenseMatrix out(rows_, m);
        for (std::size_t i = 0; i < rows_; ++i) {
            const float* src = data_.data() + i * cols_;
            float* dst = out.data_.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) dst[j] = src[j];
        }
        return out;
    }

    /// Column means, accumulated in double.
    std::vector<float> col_mean() const {
        std::vector<double> acc(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            const float* r = data_.data() + i * cols_;
            for (std::size_t j = 0; j < cols_; ++j) acc[j] += r[j];
        }
        std::vector<float> mean(cols_, 0.0f);
        if (rows_ > 0) {
            for (std::size_t j = 0; j < cols_; ++j)
                mean[j] = static_cast<float>(acc[j] / static_cast<double>(rows_));
        }
        return mean;
    }

    void check_finite() const {
        for (float v : data_) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("DenseMatrix: non-finite entry");
            }
        }
    }

    bool operator==(const DenseMatrix& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

}  // namespace csr
