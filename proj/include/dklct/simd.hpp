#pragma once

// Vector kernels for the hot inner loops (Householder updates, basis
// accumulation, batched network layers).
//
// Every kernel has a scalar reference implementation. When the library is
// built for x86-64 an AVX2/FMA variant is compiled into its own translation
// unit and selected at runtime if the CPU reports support for it.

#include <cstddef>
#include <span>
#include <string_view>

namespace dklct::simd {

enum class Backend { scalar, avx2 };

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*scale)(double alpha, double* x, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    // g[i] *= 1 - a[i]^2
    void (*tanh_backward)(const double* a, double* g, std::size_t n);
    // y[i] = tanh(y[i])
    void (*tanh_inplace)(double* y, std::size_t n);
};

namespace scalar {
const KernelTable& table();
}

#if defined(DKLCT_WITH_AVX2)
namespace avx2 {
const KernelTable& table();
}
#endif

/// True when the AVX2 variants were compiled in and the running CPU supports them.
bool avx2_available();

/// Backend chosen at first use: AVX2 when available, scalar otherwise.
Backend active_backend();
std::string_view backend_name(Backend b);

/// Forces a backend (falls back to scalar if AVX2 is requested but unavailable).
void set_backend(Backend b);

const KernelTable& kernels();

inline double dot(std::span<const double> a, std::span<const double> b) {
    return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline void scale(double alpha, std::span<double> x) { kernels().scale(alpha, x.data(), x.size()); }

inline double sum(std::span<const double> x) { return kernels().sum(x.data(), x.size()); }

inline void tanh_backward(std::span<const double> a, std::span<double> g) {
    kernels().tanh_backward(a.data(), g.data(), a.size());
}

inline void tanh_inplace(std::span<double> y) { kernels().tanh_inplace(y.data(), y.size()); }

} // namespace dklct::simd
