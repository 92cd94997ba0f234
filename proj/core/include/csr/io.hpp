#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "csr/dense_matrix.hpp"
#include "csr/sparse.hpp"

namespace csr {

/// Raised on any file-format violation (bad magic, version mismatch,
/// truncation, dimension overflow, invalid payload).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FileKind : std::uint8_t {
    Dense = 0,
    Sparse = 1,
    Labels = 2,
};

struct FileInfo {
    FileKind kind;
    std::uint32_t version;
    std::uint64_t rows;
    std::uint64_t cols;  // 0 for label files
    std::uint64_t nnz;   // sparse files only
};

/// Header peek without loading the payload.
FileInfo inspect_file(const std::string& path);

void save_dense(const DenseMatrix& m, const std::string& path);
DenseMatrix load_dense(const std::string& path);

void save_sparse(const SparseMatrixCSR& m, const std::string& path);
SparseMatrixCSR load_sparse(const std::string& path);

void save_labels(const std::vector<std::uint32_t>& labels, const std::string& path);
std::vector<std::uint32_t> load_labels(const std::string& path);

/// Writes bytes to path atomically (temp file in the same directory, then rename).
void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace csr
