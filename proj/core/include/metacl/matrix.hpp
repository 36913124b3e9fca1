#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "metacl/errors.hpp"

namespace metacl {

// Dense row-major matrix. Deliberately minimal: the trainer only needs
// products, transposed products and elementwise work, and keeping the type
// dumb makes the float/double instantiations trivially comparable.
template <typename T>
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), T{0}) {
        if (r < 0 || c < 0) throw validation_error("matrix dims must be non-negative, got " + shape_str());
    }

    size_t size() const { return data.size(); }

    T* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const T* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }

    T& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    const T& at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

namespace detail {
inline void require(bool ok, const std::string& msg) {
    if (!ok) throw shape_error(msg);
}
} // namespace detail

// C = A * B. ikj loop order so the inner loop runs over contiguous rows of B
// and C and auto-vectorizes.
template <typename T>
void matmul_into(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
    detail::require(a.cols == b.rows, "matmul: inner dims disagree, " + a.shape_str() + " * " + b.shape_str());
    if (c.rows != a.rows || c.cols != b.cols) c = Matrix<T>(a.rows, b.cols);
    else c.fill(T{0});
    for (int i = 0; i < a.rows; ++i) {
        const T* ai = a.row(i);
        T* ci = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const T aik = ai[k];
            const T* bk = b.row(k);
            for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    Matrix<T> c;
    matmul_into(a, b, c);
    return c;
}

// C = A^T * B (A: n x m, B: n x p, C: m x p). Used for weight gradients.
template <typename T>
Matrix<T> matmul_t1(const Matrix<T>& a, const Matrix<T>& b) {
    detail::require(a.rows == b.rows, "matmul_t1: row counts disagree, " + a.shape_str() + " vs " + b.shape_str());
    Matrix<T> c(a.cols, b.cols);
    for (int n = 0; n < a.rows; ++n) {
        const T* an = a.row(n);
        const T* bn = b.row(n);
        for (int i = 0; i < a.cols; ++i) {
            const T ani = an[i];
            T* ci = c.row(i);
            for (int j = 0; j < b.cols; ++j) ci[j] += ani * bn[j];
        }
    }
    return c;
}

// C = A * B^T (A: n x m, B: p x m, C: n x p). Used to push deltas backward.
template <typename T>
Matrix<T> matmul_t2(const Matrix<T>& a, const Matrix<T>& b) {
    detail::require(a.cols == b.cols, "matmul_t2: col counts disagree, " + a.shape_str() + " vs " + b.shape_str());
    Matrix<T> c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const T* ai = a.row(i);
        T* ci = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const T* bj = b.row(j);
            T acc{0};
            for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
            ci[j] = acc;
        }
    }
    return c;
}

template <typename T>
void add_row_inplace(Matrix<T>& m, const Matrix<T>& bias) {
    detail::require(bias.rows == 1 && bias.cols == m.cols,
                    "add_row_inplace: bias " + bias.shape_str() + " does not broadcast over " + m.shape_str());
    for (int i = 0; i < m.rows; ++i) {
        T* mi = m.row(i);
        const T* b = bias.row(0);
        for (int j = 0; j < m.cols; ++j) mi[j] += b[j];
    }
}

// Column sums collapsed to a 1 x cols row (bias gradients).
template <typename T>
Matrix<T> col_sums(const Matrix<T>& m) {
    Matrix<T> out(1, m.cols);
    T* o = out.row(0);
    for (int i = 0; i < m.rows; ++i) {
        const T* mi = m.row(i);
        for (int j = 0; j < m.cols; ++j) o[j] += mi[j];
    }
    return out;
}

// y += alpha * x over raw storage; shapes must match exactly.
template <typename T>
void axpy_inplace(Matrix<T>& y, T alpha, const Matrix<T>& x) {
    detail::require(y.same_shape(x), "axpy: shapes disagree, " + y.shape_str() + " vs " + x.shape_str());
    for (size_t i = 0; i < y.size(); ++i) y.data[i] += alpha * x.data[i];
}

template <typename T>
void scale_inplace(Matrix<T>& m, T alpha) {
    for (auto& v : m.data) v *= alpha;
}

template <typename T>
T max_abs(const Matrix<T>& m) {
    T best{0};
    for (auto v : m.data) {
        T a = std::abs(v);
        if (a > best) best = a;
    }
    return best;
}

template <typename T>
bool all_finite(const Matrix<T>& m) {
    for (auto v : m.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

} // namespace metacl
