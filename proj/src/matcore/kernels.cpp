#include <cmath>
#include <string>

#include "graphsync/matcore.hpp"
#include "parallel.hpp"

namespace graphsync {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (!(a.same_shape(b))) fail(ErrorKind::dimension,
            std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (!(a.cols() == b.rows())) fail(ErrorKind::dimension,
            "matmul: " + shape_string(a) + " * " + shape_string(b));
    const std::size_t inner = a.cols(), k = b.cols();
    DenseMatrix c(a.rows(), k);
    detail::for_index(a.rows(), a.rows() * inner * k >= kParallelWork, [&](std::size_t i) {
        auto out = c.row(i);
        const auto lhs = a.row(i);
        for (std::size_t p = 0; p < inner; ++p) {
            const double s = lhs[p];
            const auto rhs = b.row(p);
            for (std::size_t j = 0; j < k; ++j) out[j] += s * rhs[j];
        }
    });
    return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (!(a.rows() == b.rows())) fail(ErrorKind::dimension,
            "matmul_tn: " + shape_string(a) + "^T * " + shape_string(b));
    const std::size_t inner = a.rows(), k = b.cols();
    DenseMatrix c(a.cols(), k);
    detail::for_index(a.cols(), a.cols() * inner * k >= kParallelWork, [&](std::size_t i) {
        auto out = c.row(i);
        for (std::size_t p = 0; p < inner; ++p) {
            const double s = a(p, i);
            const auto rhs = b.row(p);
            for (std::size_t j = 0; j < k; ++j) out[j] += s * rhs[j];
        }
    });
    return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (!(a.cols() == b.cols())) fail(ErrorKind::dimension,
            "matmul_nt: " + shape_string(a) + " * " + shape_string(b) + "^T");
    const std::size_t inner = a.cols(), k = b.rows();
    DenseMatrix c(a.rows(), k);
    detail::for_index(a.rows(), a.rows() * inner * k >= kParallelWork, [&](std::size_t i) {
        const auto lhs = a.row(i);
        auto out = c.row(i);
        for (std::size_t j = 0; j < k; ++j) {
            const auto rhs = b.row(j);
            double s = 0.0;
            for (std::size_t p = 0; p < inner; ++p) s += lhs[p] * rhs[p];
            out[j] = s;
        }
    });
    return c;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "add");
    DenseMatrix c = a;
    axpy(c, 1.0, b);
    return c;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "subtract");
    DenseMatrix c = a;
    axpy(c, -1.0, b);
    return c;
}

DenseMatrix scaled(const DenseMatrix& a, double factor) {
    DenseMatrix c = a;
    for (double& v : c.values()) v *= factor;
    return c;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "hadamard");
    DenseMatrix c = a;
    auto out = c.values();
    const auto rhs = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= rhs[i];
    return c;
}

void axpy(DenseMatrix& a, double factor, const DenseMatrix& b) {
    require_same_shape(a, b, "axpy");
    auto out = a.values();
    const auto rhs = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += factor * rhs[i];
}

double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "frobenius_inner");
    const auto x = a.values();
    const auto y = b.values();
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double frobenius_norm(const DenseMatrix& a) { return std::sqrt(frobenius_inner(a, a)); }

double trace(const DenseMatrix& a) {
    if (!(a.rows() == a.cols())) fail(ErrorKind::dimension, "trace of non-square " + shape_string(a));
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
    return s;
}

std::vector<double> row_sums(const DenseMatrix& a) {
    std::vector<double> sums(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (double v : a.row(r)) sums[r] += v;
    return sums;
}

std::vector<double> col_sums(const DenseMatrix& a) {
    std::vector<double> sums(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) sums[c] += row[c];
    }
    return sums;
}

void require_finite(const DenseMatrix& a, const char* what) {
    if (!(a.all_finite())) fail(ErrorKind::input, std::string(what) + " has non-finite entries");
}

namespace reference {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), ErrorKind::dimension, "reference::matmul shape mismatch");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
            c(i, j) = s;
        }
    return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows(), ErrorKind::dimension, "reference::matmul_tn shape mismatch");
    DenseMatrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < a.rows(); ++p) s += a(p, i) * b(p, j);
            c(i, j) = s;
        }
    return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.cols(), ErrorKind::dimension, "reference::matmul_nt shape mismatch");
    DenseMatrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(j, p);
            c(i, j) = s;
        }
    return c;
}

}  // namespace reference

}  // namespace graphsync
