#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "gckd/errors.hpp"

namespace gckd {

using Vector = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row_span(std::size_t i) { return {row(i), cols}; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool operator==(const Matrix&) const = default;
};

double cosine_sim(std::span<const double> a, std::span<const double> b);

Vector l2_normalize(std::span<const double> a);
// Normalizes in place and returns the pre-normalization L2 norm.
double l2_normalize_in_place(double* x, std::size_t n);

Vector softmax_temp(std::span<const double> logits, double tau);
void softmax_temp_in_place(double* x, std::size_t n, double tau);

bool all_finite(std::span<const double> x);
bool all_finite(const Matrix& m);

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// c = a * b^T  (rows of b as the contraction side; this is the similarity
// matrix layout used throughout)
Matrix matmul_abt(const Matrix& a, const Matrix& b);
// c += a^T * b  (rank-B accumulation, used for weight gradients)
void accumulate_atb(const Matrix& a, const Matrix& b, Matrix& c);
// out.row(i) += bias for every row
void add_row_bias(Matrix& m, std::span<const double> bias);

Matrix transpose(const Matrix& m);

}  // namespace gckd
