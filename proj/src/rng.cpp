#include "gckd/rng.hpp"

#include <cmath>

#include "gckd/kernels.hpp"

namespace gckd {

Vector gaussian_vector(Rng& rng, std::size_t n, double sigma) {
    std::normal_distribution<double> dist(0.0, sigma);
    Vector v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sigma) {
    std::normal_distribution<double> dist(0.0, sigma);
    Matrix m(rows, cols);
    for (auto& x : m.data) x = dist(rng);
    return m;
}

Vector random_unit_vector(Rng& rng, std::size_t n) {
    Vector v = gaussian_vector(rng, n);
    l2_normalize_in_place(v.data(), v.size());
    return v;
}

Matrix random_orthogonal(Rng& rng, std::size_t n) {
    // Modified Gram-Schmidt on a Gaussian matrix; redraw a column in the
    // (measure-zero) event it degenerates.
    Matrix q = gaussian_matrix(rng, n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double* qi = q.row(i);
        for (std::size_t j = 0; j < i; ++j) {
            const double* qj = q.row(j);
            const double proj = kernels::dot(qi, qj, n);
            kernels::axpy(-proj, qj, qi, n);
        }
        double sq = kernels::squared_norm(qi, n);
        while (sq < 1e-12) {
            Vector fresh = gaussian_vector(rng, n);
            std::copy(fresh.begin(), fresh.end(), qi);
            for (std::size_t j = 0; j < i; ++j) {
                const double* qj = q.row(j);
                kernels::axpy(-kernels::dot(qi, qj, n), qj, qi, n);
            }
            sq = kernels::squared_norm(qi, n);
        }
        kernels::scale(qi, n, 1.0 / std::sqrt(sq));
    }
    return q;
}

}  // namespace gckd
