#include "dklct/basis.hpp"

#include "dklct/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dklct {

KernelHyperparameters KernelHyperparameters::from_values(double sigma_f, std::vector<double> lengthscales,
                                                         double sigma) {
    if (!(sigma_f > 0.0) || !(sigma > 0.0)) throw std::invalid_argument("hyperparameters must be positive");
    KernelHyperparameters h;
    h.log_sigma_f = std::log(sigma_f);
    h.log_sigma = std::log(sigma);
    for (double l : lengthscales) {
        if (!(l > 0.0)) throw std::invalid_argument("lengthscales must be positive");
        h.log_lengthscales.push_back(std::log(l));
    }
    return h;
}

double KernelHyperparameters::sigma_f() const { return std::exp(log_sigma_f); }
double KernelHyperparameters::lengthscale(std::size_t k) const { return std::exp(log_lengthscales.at(k)); }
double KernelHyperparameters::sigma() const { return std::exp(log_sigma); }

double KernelHyperparameters::min_lengthscale() const {
    if (log_lengthscales.empty()) throw std::logic_error("no lengthscales");
    return std::exp(*std::min_element(log_lengthscales.begin(), log_lengthscales.end()));
}

std::size_t BasisSpec::count() const {
    std::size_t m = 1;
    for (std::size_t k = 0; k < dims(); ++k) m *= m_tilde;
    return m;
}

double BasisSpec::frequency(std::size_t k, std::size_t jk) const {
    return static_cast<double>(jk) * std::numbers::pi / (2.0 * half_widths[k]);
}

std::vector<std::size_t> index_tuple(const BasisSpec& spec, std::size_t flat) {
    std::vector<std::size_t> j(spec.dims());
    for (std::size_t k = spec.dims(); k-- > 0;) {
        j[k] = flat % spec.m_tilde + 1;
        flat /= spec.m_tilde;
    }
    return j;
}

double eval_eigenfunction(const BasisSpec& spec, std::span<const std::size_t> j, std::span<const double> u) {
    if (j.size() != spec.dims() || u.size() != spec.dims())
        throw DimensionError("eval_eigenfunction: dimension mismatch");
    double value = 1.0;
    for (std::size_t k = 0; k < spec.dims(); ++k) {
        const double lk = spec.half_widths[k];
        // The boundary is an exact zero, not sin(π·j) rounding noise.
        if (u[k] == -lk || u[k] == lk) return 0.0;
        value *= std::sin(spec.frequency(k, j[k]) * (u[k] + lk)) / std::sqrt(lk);
    }
    return value;
}

double eigenvalue(const BasisSpec& spec, std::span<const std::size_t> j) {
    if (j.size() != spec.dims()) throw DimensionError("eigenvalue: dimension mismatch");
    double lambda = 0.0;
    for (std::size_t k = 0; k < spec.dims(); ++k) {
        const double c = spec.frequency(k, j[k]);
        lambda += c * c;
    }
    return lambda;
}

double se_spectral_density(const KernelHyperparameters& hyp, std::span<const double> omega) {
    if (omega.size() != hyp.dims()) throw DimensionError("se_spectral_density: dimension mismatch");
    double log_s = 2.0 * hyp.log_sigma_f + 0.5 * static_cast<double>(hyp.dims()) * std::log(2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < hyp.dims(); ++k) {
        const double l = hyp.lengthscale(k);
        log_s += hyp.log_lengthscales[k] - 0.5 * l * l * omega[k] * omega[k];
    }
    return std::exp(log_s);
}

double se_kernel(const KernelHyperparameters& hyp, std::span<const double> u, std::span<const double> v) {
    if (u.size() != hyp.dims() || v.size() != hyp.dims()) throw DimensionError("se_kernel: dimension mismatch");
    double q = 0.0;
    for (std::size_t k = 0; k < hyp.dims(); ++k) {
        const double d = (u[k] - v[k]) / hyp.lengthscale(k);
        q += d * d;
    }
    return std::exp(2.0 * hyp.log_sigma_f - 0.5 * q);
}

DomainSelection select_domain(const KernelHyperparameters& hyp, std::size_t m_tilde, double alpha,
                              std::span<const double> u_extent) {
    if (!(alpha > 0.0) || m_tilde == 0) throw std::invalid_argument("select_domain: need alpha > 0 and m_tilde >= 1");
    if (u_extent.size() != hyp.dims()) throw DimensionError("select_domain: dimension mismatch");
    DomainSelection out;
    for (std::size_t k = 0; k < hyp.dims(); ++k) {
        const double spectral = static_cast<double>(m_tilde) * std::numbers::pi * hyp.lengthscale(k) / (2.0 * alpha);
        const double margin = kDomainMargin * u_extent[k];
        out.spectral_branch.push_back(spectral >= margin);
        out.half_widths.push_back(std::max(spectral, margin));
    }
    return out;
}

} // namespace dklct
