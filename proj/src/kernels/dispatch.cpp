#include "gckd/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace gckd::kernels {

namespace detail {

extern const Table scalar_table;
#if GCKD_HAVE_AVX2_BUILD
extern const Table avx2_table;
#endif

namespace {

bool avx2_usable() {
#if GCKD_HAVE_AVX2_BUILD
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Table* lookup(std::string_view name) {
    if (name == "scalar") return &scalar_table;
#if GCKD_HAVE_AVX2_BUILD
    if (name == "avx2" && avx2_usable()) return &avx2_table;
#endif
    return nullptr;
}

const Table* select_default() {
    if (const char* env = std::getenv("GCKD_KERNELS")) {
        if (const Table* t = lookup(env)) return t;
    }
    if (avx2_usable()) return lookup("avx2");
    return &scalar_table;
}

}  // namespace

const Table* g_active = select_default();

}  // namespace detail

std::string_view impl_name() { return detail::g_active->name; }

bool force_impl(std::string_view name) {
    if (const detail::Table* t = detail::lookup(name)) {
        detail::g_active = t;
        return true;
    }
    return false;
}

std::vector<std::string_view> available_impls() {
    std::vector<std::string_view> out{"scalar"};
#if GCKD_HAVE_AVX2_BUILD
    if (detail::lookup("avx2")) out.push_back("avx2");
#endif
    return out;
}

const detail::Table* table(std::string_view name) { return detail::lookup(name); }

}  // namespace gckd::kernels
