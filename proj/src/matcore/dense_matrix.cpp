#include "graphsync/dense_matrix.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "graphsync/error.hpp"

namespace graphsync {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::input: return "input";
        case ErrorKind::degenerate_feature: return "degenerate-feature";
        case ErrorKind::empty_mask: return "empty-mask";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::label: return "label";
        case ErrorKind::mode: return "mode";
        case ErrorKind::incomplete_set: return "incomplete-set";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::oracle_size: return "oracle-size";
        case ErrorKind::missing_truth: return "missing-truth";
        case ErrorKind::io: return "io";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (!(data_.size() == rows_ * cols_)) fail(ErrorKind::dimension,
            "data length " + std::to_string(data_.size()) + " does not match " +
                std::to_string(rows) + "x" + std::to_string(cols));
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require(r.size() == cols_, ErrorKind::dimension, "ragged initializer list");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) { return leading_identity(n, n); }

DenseMatrix DenseMatrix::leading_identity(std::size_t n, std::size_t k) {
    require(n <= k, ErrorKind::dimension, "leading identity needs n <= k");
    DenseMatrix m(n, k);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

bool DenseMatrix::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_string(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void write_matrix(std::ostream& out, const DenseMatrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out << ' ';
            out << m(r, c);
        }
        out << '\n';
    }
    out.precision(old_precision);
}

DenseMatrix read_matrix(std::istream& in) {
    std::size_t rows = 0, cols = 0;
    if (!(in >> rows >> cols)) fail(ErrorKind::io, "missing matrix header");
    std::vector<double> data(rows * cols);
    for (auto& v : data) {
        // operator>> rejects "nan"/"inf"; fixtures only ever hold finite values
        if (!(in >> v)) fail(ErrorKind::io, "truncated matrix body (" + std::to_string(rows) + "x" +
                                                std::to_string(cols) + ")");
    }
    return DenseMatrix(rows, cols, std::move(data));
}

void save_matrix(const std::string& path, const DenseMatrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot open " + path + " for writing");
    write_matrix(out, m);
    if (!out) fail(ErrorKind::io, "failed writing " + path);
}

DenseMatrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    try {
        return read_matrix(in);
    } catch (const Error& e) {
        fail(ErrorKind::io, path + ": " + e.what());
    }
}

}  // namespace graphsync
