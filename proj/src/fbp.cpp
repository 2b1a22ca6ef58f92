#include "dklct/ct.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <numbers>

namespace dklct {

namespace {

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <class T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (p == nullptr) throw std::bad_alloc();
    return std::unique_ptr<T[], FftwFree>(p);
}

std::size_t padded_length(std::size_t n) {
    std::size_t p = 64;
    while (p < 2 * n) p *= 2;
    return p;
}

} // namespace

ImageGrid fbp_reconstruct(const Sinogram& sino, std::size_t nx, std::size_t ny) {
    sino.validate();
    const auto& geo = sino.geometry;
    const std::size_t nd = geo.n_detectors;
    const std::size_t np = padded_length(nd);
    const std::size_t nf = np / 2 + 1;
    const double cell = 2.0 * geo.object_radius / static_cast<double>(nd);

    auto sig = fftw_buffer<double>(np);
    auto spec = fftw_buffer<fftw_complex>(nf);
    Plan fwd(fftw_plan_dft_r2c_1d(static_cast<int>(np), sig.get(), spec.get(), FFTW_ESTIMATE));
    Plan inv(fftw_plan_dft_c2r_1d(static_cast<int>(np), spec.get(), sig.get(), FFTW_ESTIMATE));

    // Ram-Lak response sampled in space (periodic over the padded length), so
    // the discrete filter has no DC offset
    for (std::size_t k = 0; k < np; ++k) {
        const std::size_t m = std::min(k, np - k);
        double h = 0.0;
        if (m == 0) h = 0.25 / (cell * cell);
        else if (m % 2 == 1) h = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(m * m) * cell * cell);
        sig[k] = h;
    }
    fftw_execute(fwd.get());
    std::vector<double> filter(nf);
    for (std::size_t k = 0; k < nf; ++k) filter[k] = spec[k][0] * cell / static_cast<double>(np);

    Matrix filtered(geo.projections(), nd);
    for (std::size_t p = 0; p < geo.projections(); ++p) {
        for (std::size_t k = 0; k < np; ++k) sig[k] = k < nd ? sino.values(p, k) : 0.0;
        fftw_execute(fwd.get());
        for (std::size_t k = 0; k < nf; ++k) {
            spec[k][0] *= filter[k];
            spec[k][1] *= filter[k];
        }
        fftw_execute(inv.get());
        for (std::size_t j = 0; j < nd; ++j) filtered(p, j) = sig[j];
    }

    ImageGrid img(nx, ny);
    const double weight = std::numbers::pi / static_cast<double>(geo.projections());
    for (std::size_t p = 0; p < geo.projections(); ++p) {
        const double a = geo.angles_deg[p] * std::numbers::pi / 180.0;
        const double c = std::cos(a), s = std::sin(a);
        const auto row = filtered.row(p);
        for (std::size_t iy = 0; iy < ny; ++iy) {
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const double t = img.x(ix) * c + img.y(iy) * s;
                const double f = (t + geo.object_radius) / cell - 0.5;
                const double fl = std::floor(f);
                const auto j = static_cast<long long>(fl);
                const double w = f - fl;
                double v = 0.0;
                if (j >= 0 && j < static_cast<long long>(nd)) v += (1.0 - w) * row[static_cast<std::size_t>(j)];
                if (j + 1 >= 0 && j + 1 < static_cast<long long>(nd)) v += w * row[static_cast<std::size_t>(j + 1)];
                img.at(ix, iy) += weight * v;
            }
        }
    }
    return img;
}

} // namespace dklct
