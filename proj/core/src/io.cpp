#include "csr/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace csr {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'R', 'E'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError(path + ": cannot open file");
    }

    void read_bytes(void* dst, std::size_t n) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError(path_ + ": truncated file");
        }
    }

    template <typename T>
    T read_scalar() {
        T v;
        read_bytes(&v, sizeof(T));
        return v;
    }

    template <typename T>
    std::vector<T> read_array(std::uint64_t count) {
        if (count > std::numeric_limits<std::size_t>::max() / sizeof(T)) {
            throw FormatError(path_ + ": dimension overflow");
        }
        std::vector<T> v(static_cast<std::size_t>(count));
        read_bytes(v.data(), v.size() * sizeof(T));
        return v;
    }

    void expect_eof() {
        in_.peek();
        if (!in_.eof()) throw FormatError(path_ + ": trailing bytes after payload");
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
};

FileInfo read_header(Reader& r) {
    char magic[4];
    r.read_bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(r.path() + ": bad magic");
    FileInfo info{};
    info.version = r.read_scalar<std::uint32_t>();
    if (info.version != kVersion) throw FormatError(r.path() + ": unsupported version");
    const auto dtype = r.read_scalar<std::uint8_t>();
    if (dtype != kDtypeF32) throw FormatError(r.path() + ": unsupported dtype");
    const auto kind = r.read_scalar<std::uint8_t>();
    if (kind > 2) throw FormatError(r.path() + ": unknown file kind");
    info.kind = static_cast<FileKind>(kind);
    r.read_scalar<std::uint16_t>();  // padding
    info.rows = r.read_scalar<std::uint64_t>();
    if (info.kind != FileKind::Labels) info.cols = r.read_scalar<std::uint64_t>();
    if (info.kind == FileKind::Sparse) info.nnz = r.read_scalar<std::uint64_t>();
    return info;
}

void append_header(std::vector<std::uint8_t>& out, FileKind kind, std::uint64_t rows,
                   std::uint64_t cols, std::uint64_t nnz) {
    auto put = [&out](const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    };
    put(kMagic, 4);
    put(&kVersion, 4);
    put(&kDtypeF32, 1);
    const auto k = static_cast<std::uint8_t>(kind);
    put(&k, 1);
    const std::uint16_t pad = 0;
    put(&pad, 2);
    put(&rows, 8);
    if (kind != FileKind::Labels) put(&cols, 8);
    if (kind == FileKind::Sparse) put(&nnz, 8);
}

template <typename T>
void append_array(std::vector<std::uint8_t>& out, const std::vector<T>& v) {
    const auto* b = reinterpret_cast<const std::uint8_t*>(v.data());
    out.insert(out.end(), b, b + v.size() * sizeof(T));
}

// rows*cols with overflow detection
std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const std::string& path) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
        throw FormatError(path + ": dimension overflow");
    }
    return a * b;
}

}  // namespace

FileInfo inspect_file(const std::string& path) {
    Reader r(path);
    return read_header(r);
}

void save_dense(const DenseMatrix& m, const std::string& path) {
    std::vector<std::uint8_t> out;
    out.reserve(32 + m.data().size() * 4);
    append_header(out, FileKind::Dense, m.rows(), m.cols(), 0);
    append_array(out, m.data());
    atomic_write_file(path, out);
}

DenseMatrix load_dense(const std::string& path) {
    Reader r(path);
    const FileInfo info = read_header(r);
    if (info.kind != FileKind::Dense) throw FormatError(path + ": not a dense file");
    const std::uint64_t count = checked_mul(info.rows, info.cols, path);
    auto data = r.read_array<float>(count);
    r.expect_eof();
    try {
        return DenseMatrix(static_cast<std::size_t>(info.rows), static_cast<std::size_t>(info.cols),
                           std::move(data));
    } catch (const std::invalid_argument& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void save_sparse(const SparseMatrixCSR& m, const std::string& path) {
    std::vector<std::uint8_t> out;
    append_header(out, FileKind::Sparse, m.rows(), m.cols(), m.nnz());
    append_array(out, m.indptr());
    append_array(out, m.indices());
    append_array(out, m.values());
    atomic_write_file(path, out);
}

SparseMatrixCSR load_sparse(const std::string& path) {
    Reader r(path);
    const FileInfo info = read_header(r);
    if (info.kind != FileKind::Sparse) throw FormatError(path + ": not a sparse file");
    checked_mul(info.rows + 1, 8, path);
    auto indptr = r.read_array<std::uint64_t>(info.rows + 1);
    auto indices = r.read_array<std::uint32_t>(info.nnz);
    auto values = r.read_array<float>(info.nnz);
    r.expect_eof();
    try {
        return SparseMatrixCSR(static_cast<std::size_t>(info.rows), static_cast<std::size_t>(info.cols),
                               std::move(indptr), std::move(indices), std::move(values));
    } catch (const std::invalid_argument& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void save_labels(const std::vector<std::uint32_t>& labels, const std::string& path) {
    std::vector<std::uint8_t> out;
    append_header(out, FileKind::Labels, labels.size(), 0, 0);
    append_array(out, labels);
    atomic_write_file(path, out);
}

std::vector<std::uint32_t> load_labels(const std::string& path) {
    Reader r(path);
    const FileInfo info = read_header(r);
    if (info.kind != FileKind::Labels) throw FormatError(path + ": not a label file");
    auto labels = r.read_array<std::uint32_t>(info.rows);
    r.expect_eof();
    return labels;
}

void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error(tmp + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error(path + ": rename failed: " + ec.message());
    }
}

}  // namespace csr
