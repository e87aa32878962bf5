#include "gckd/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "gckd/kernels.hpp"

namespace gckd {

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeError("cosine_sim: length mismatch");
    const double na = kernels::squared_norm(a.data(), a.size());
    const double nb = kernels::squared_norm(b.data(), b.size());
    if (na == 0.0 || nb == 0.0)
        throw DomainError("cosine_sim: zero-norm input");
    const double s = kernels::dot(a.data(), b.data(), a.size()) / std::sqrt(na * nb);
    return std::clamp(s, -1.0, 1.0);
}

double l2_normalize_in_place(double* x, std::size_t n) {
    const double sq = kernels::squared_norm(x, n);
    if (sq == 0.0) throw DomainError("l2_normalize: zero vector");
    const double norm = std::sqrt(sq);
    kernels::scale(x, n, 1.0 / norm);
    return norm;
}

Vector l2_normalize(std::span<const double> a) {
    Vector out(a.begin(), a.end());
    l2_normalize_in_place(out.data(), out.size());
    return out;
}

void softmax_temp_in_place(double* x, std::size_t n, double tau) {
    if (tau <= 0.0) throw ParamError("softmax_temp: tau must be positive");
    if (n == 0) return;
    double mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::exp((x[i] - mx) / tau);
        sum += x[i];
    }
    kernels::scale(x, n, 1.0 / sum);
}

Vector softmax_temp(std::span<const double> logits, double tau) {
    Vector out(logits.begin(), logits.end());
    softmax_temp_in_place(out.data(), out.size(), tau);
    return out;
}

bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Matrix& m) { return all_finite(std::span<const double>(m.data)); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimension mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t l = 0; l < a.cols; ++l)
            kernels::axpy(arow[l], b.row(l), crow, b.cols);
    }
    return c;
}

Matrix matmul_abt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw ShapeError("matmul_abt: width mismatch");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j)
            crow[j] = kernels::dot(a.row(i), b.row(j), a.cols);
    }
    return c;
}

void accumulate_atb(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols)
        throw ShapeError("accumulate_atb: shape mismatch");
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* arow = a.row(r);
        const double* brow = b.row(r);
        for (std::size_t i = 0; i < a.cols; ++i)
            kernels::axpy(arow[i], brow, c.row(i), b.cols);
    }
}

void add_row_bias(Matrix& m, std::span<const double> bias) {
    if (bias.size() != m.cols) throw ShapeError("add_row_bias: width mismatch");
    for (std::size_t i = 0; i < m.rows; ++i)
        kernels::axpy(1.0, bias.data(), m.row(i), m.cols);
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
    return t;
}

}  // namespace gckd
