// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against.

#include "gckd/kernels.hpp"

namespace gckd::kernels::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double squared_norm_scalar(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double* x, std::size_t n, double alpha) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

}  // namespace

extern const Table scalar_table;
const Table scalar_table = {dot_scalar, squared_norm_scalar, axpy_scalar,
                            scale_scalar, "scalar"};

}  // namespace gckd::kernels::detail
