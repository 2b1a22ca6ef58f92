#include "dklct/simd.hpp"

#include <atomic>

namespace dklct::simd {
namespace {

bool detect_avx2() {
#if defined(DKLCT_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_for(Backend b) {
#if defined(DKLCT_WITH_AVX2)
    if (b == Backend::avx2 && avx2_available()) return &avx2::table();
#endif
    (void)b;
    return &scalar::table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> t{table_for(avx2_available() ? Backend::avx2 : Backend::scalar)};
    return t;
}

} // namespace

bool avx2_available() {
    static const bool ok = detect_avx2();
    return ok;
}

Backend active_backend() {
    return current().load() == &scalar::table() ? Backend::scalar : Backend::avx2;
}

std::string_view backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

void set_backend(Backend b) { current().store(table_for(b)); }

const KernelTable& kernels() { return *current().load(std::memory_order_relaxed); }

} // namespace dklct::simd
