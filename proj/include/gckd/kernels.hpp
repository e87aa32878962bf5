#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

// Double-precision inner-loop kernels. A scalar reference implementation is
// always available; an AVX2/FMA variant is selected at runtime on x86-64.
// Force a specific implementation with force_impl() or the GCKD_KERNELS
// environment variable ("scalar" | "avx2").
namespace gckd::kernels {

namespace detail {
struct Table {
    double (*dot)(const double*, const double*, std::size_t);
    double (*squared_norm)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double*, std::size_t, double);
    const char* name;
};
extern const Table* g_active;
}  // namespace detail

inline double dot(const double* a, const double* b, std::size_t n) {
    return detail::g_active->dot(a, b, n);
}
inline double squared_norm(const double* a, std::size_t n) {
    return detail::g_active->squared_norm(a, n);
}
// y += alpha * x
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    detail::g_active->axpy(alpha, x, y, n);
}
inline void scale(double* x, std::size_t n, double alpha) {
    detail::g_active->scale(x, n, alpha);
}

std::string_view impl_name();
bool force_impl(std::string_view name);
std::vector<std::string_view> available_impls();
// Direct access to a named implementation (equivalence tests); nullptr if absent.
const detail::Table* table(std::string_view name);

}  // namespace gckd::kernels
