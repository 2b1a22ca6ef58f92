#include "dklct/simd.hpp"

#include <cmath>

namespace dklct::simd::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void tanh_backward(const double* a, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] *= 1.0 - a[i] * a[i];
}

void tanh_inplace(double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(y[i]);
}

} // namespace

const KernelTable& table() {
    static const KernelTable t{dot, axpy, scale, sum, tanh_backward, tanh_inplace};
    return t;
}

} // namespace dklct::simd::scalar
