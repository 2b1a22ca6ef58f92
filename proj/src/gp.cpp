#include "dklct/gp.hpp"

#include "dklct/simd.hpp"
#include "gp_detail.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dklct {

LineSampling::LineSampling(std::span<const LineMeasurement> lines, std::span<const std::size_t> node_counts) {
    if (lines.size() != node_counts.size()) throw DimensionError("LineSampling: one node count per line required");
    const std::size_t dim = lines.empty() ? 0 : lines.front().dims();
    std::size_t total = 0;
    offsets_.push_back(0);
    for (std::size_t n : node_counts) offsets_.push_back(total += n);
    points_ = Matrix(dim, total);
    weights_.resize(total);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        line.validate();
        if (line.dims() != dim) throw DimensionError("LineSampling: lines of mixed dimension");
        const SimpsonRule rule = simpson_rule(line.half_length, node_counts[i]);
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const std::size_t t = offsets_[i] + q;
            weights_[t] = rule.weights[q];
            for (std::size_t k = 0; k < dim; ++k) points_(k, t) = line.center[k] + rule.nodes[q] * line.direction[k];
        }
    }
}

std::vector<std::size_t> node_counts_for(std::span<const LineMeasurement> lines, double min_lengthscale,
                                         std::size_t max_nodes, std::size_t floor_nodes) {
    if (max_nodes % 2 == 0) --max_nodes;
    std::vector<std::size_t> counts;
    counts.reserve(lines.size());
    for (const auto& line : lines)
        counts.push_back(std::min(max_nodes, default_node_count(line.half_length, min_lengthscale, floor_nodes)));
    return counts;
}

namespace detail {

LatentNodes latent_at_nodes(const Warp& warp, const Matrix& points, bool keep_tape) {
    if (points.rows() != warp_input_dim(warp)) throw DimensionError("warp input dimension does not match the data");
    LatentNodes out;
    if (const auto* net = std::get_if<WarpNetwork>(&warp)) {
        auto tape = net->forward_batch(points);
        out.u = tape.output();
        if (keep_tape) out.tape = std::move(tape);
    } else {
        out.u = points;
    }
    return out;
}

BasisEvaluator::BasisEvaluator(const BasisSpec& spec)
    : spec_(spec), m_tilde_(spec.m_tilde), f_(spec.dims(), std::vector<double>(spec.m_tilde)),
      df_(spec.dims(), std::vector<double>(spec.m_tilde)), buf_a_(spec.count()), buf_b_(spec.count()) {}

bool BasisEvaluator::evaluate(std::span<const double> u) {
    bool inside = true;
    for (std::size_t k = 0; k < spec_.dims(); ++k) {
        const double l = spec_.half_widths[k];
        if (std::abs(u[k]) > l) inside = false;
        const double theta = std::numbers::pi * (u[k] + l) / (2.0 * l);
        const double norm = 1.0 / std::sqrt(l);
        const double dtheta = std::numbers::pi / (2.0 * l);
        const double c1 = std::cos(theta);
        const double s1 = std::sin(theta);
        double c = c1;
        double s = s1;
        auto& f = f_[k];
        auto& df = df_[k];
        for (std::size_t j = 1; j <= m_tilde_; ++j) {
            f[j - 1] = norm * s;
            df[j - 1] = norm * c * static_cast<double>(j) * dtheta;
            const double cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
        }
    }
    return inside;
}

std::span<const double> BasisEvaluator::kron(std::size_t replace_dim) {
    const auto factor = [&](std::size_t k) -> const std::vector<double>& { return k == replace_dim ? df_[k] : f_[k]; };
    if (spec_.dims() == 1) return factor(0);
    std::size_t len = m_tilde_;
    std::copy(factor(0).begin(), factor(0).end(), buf_a_.begin());
    for (std::size_t k = 1; k < spec_.dims(); ++k) {
        const auto& fk = factor(k);
        for (std::size_t a = 0; a < len; ++a) {
            const double va = buf_a_[a];
            for (std::size_t b = 0; b < m_tilde_; ++b) buf_b_[a * m_tilde_ + b] = va * fk[b];
        }
        len *= m_tilde_;
        std::swap(buf_a_, buf_b_);
    }
    return {buf_a_.data(), len};
}

std::span<const double> BasisEvaluator::values() { return kron(spec_.dims()); }

double BasisEvaluator::derivative_dot(std::size_t k, std::span<const double> coeff) {
    return simd::dot(kron(k), coeff);
}

Matrix build_phi(const LineSampling& sampling, const Matrix& u, const BasisSpec& spec, std::size_t* out_of_domain) {
    const std::size_t m = spec.count();
    Matrix phi(sampling.line_count(), m);
    BasisEvaluator eval(spec);
    std::vector<double> ut(spec.dims());
    std::size_t outside = 0;
    for (std::size_t i = 0; i < sampling.line_count(); ++i) {
        auto row = phi.row(i);
        for (std::size_t t = sampling.begin(i); t < sampling.end(i); ++t) {
            for (std::size_t k = 0; k < ut.size(); ++k) ut[k] = u(k, t);
            if (!eval.evaluate(ut)) ++outside;
            simd::axpy(sampling.weights()[t], eval.values(), row);
        }
    }
    if (out_of_domain != nullptr) *out_of_domain = outside;
    return phi;
}

std::vector<double> spectral_diagonal(const BasisSpec& spec, const KernelHyperparameters& hyp) {
    if (hyp.dims() != spec.dims()) throw DimensionError("hyperparameter and basis dimensions differ");
    std::vector<double> lambda(spec.count());
    std::vector<double> omega(spec.dims());
    for (std::size_t j = 0; j < lambda.size(); ++j) {
        const auto idx = index_tuple(spec, j);
        for (std::size_t k = 0; k < spec.dims(); ++k) omega[k] = spec.frequency(k, idx[k]);
        lambda[j] = se_spectral_density(hyp, omega);
    }
    return lambda;
}

Matrix stacked_operand(const Matrix& phi, std::span<const double> lambda, double sigma) {
    const std::size_t n = phi.rows();
    const std::size_t m = phi.cols();
    Matrix a(n + m, m);
    std::copy(phi.data().begin(), phi.data().end(), a.data().begin());
    for (std::size_t j = 0; j < m; ++j) a(n + j, j) = sigma / std::sqrt(lambda[j]);
    return a;
}

} // namespace detail

Matrix warp_points(const Warp& warp, const Matrix& points_rows) {
    return detail::latent_at_nodes(warp, points_rows.transposed(), false).u;
}

ReducedRankSystem assemble_phi(std::span<const LineMeasurement> lines, const Warp& warp, const BasisSpec& spec,
                               const KernelHyperparameters& hyp, std::span<const std::size_t> node_counts) {
    if (spec.dims() != warp_output_dim(warp)) throw DimensionError("assemble_phi: basis and latent dimension differ");
    const LineSampling sampling(lines, node_counts);
    const auto latent = detail::latent_at_nodes(warp, sampling.points(), false);
    ReducedRankSystem sys;
    sys.spec = spec;
    sys.hyp = hyp;
    sys.phi = detail::build_phi(sampling, latent.u, spec, &sys.out_of_domain);
    sys.lambda = detail::spectral_diagonal(spec, hyp);
    sys.r = qr_r_factor(detail::stacked_operand(sys.phi, sys.lambda, hyp.sigma()));
    return sys;
}

namespace {

void check_system(const ReducedRankSystem& sys, std::span<const double> y) {
    if (y.size() != sys.phi.rows()) throw DimensionError("observation count does not match the assembled system");
}

} // namespace

Prediction predict(const ReducedRankSystem& sys, std::span<const double> y, const Matrix& stars, const Warp& warp) {
    check_system(sys, y);
    const std::size_t m = sys.spec.count();
    Prediction out;
    const std::size_t ns = stars.rows();
    out.mean.resize(ns);
    out.variance.resize(ns);
    out.prior_variance.resize(ns);
    if (ns == 0) return out;
    if (stars.cols() != warp_input_dim(warp)) throw DimensionError("predict: star dimension mismatch");

    std::vector<double> b(m, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) simd::axpy(y[i], sys.phi.row(i), b);
    const auto z = solve_triangular(sys.r, b, Transpose::yes);
    const auto v = solve_triangular(sys.r, z, Transpose::no);

    const Matrix u = warp_points(warp, stars);
    detail::BasisEvaluator eval(sys.spec);
    std::vector<double> ut(sys.spec.dims());
    const double sigma2 = sys.hyp.sigma() * sys.hyp.sigma();
    for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t k = 0; k < ut.size(); ++k) ut[k] = u(k, s);
        if (!eval.evaluate(ut)) ++out.out_of_domain;
        const auto phi_star = eval.values();
        out.mean[s] = simd::dot(phi_star, v);
        const auto w = solve_triangular(sys.r, phi_star, Transpose::yes);
        double var = sigma2 * simd::dot(w, w);
        double prior = 0.0;
        for (std::size_t j = 0; j < m; ++j) prior += sys.lambda[j] * phi_star[j] * phi_star[j];
        out.prior_variance[s] = prior;
        if (var < 0.0) {
            var = 0.0;
            ++out.clamped_variances;
        }
        out.variance[s] = var;
    }
    return out;
}

Matrix predict_covariance(const ReducedRankSystem& sys, const Matrix& stars, const Warp& warp) {
    if (stars.rows() > kMaxCovarianceStars) throw std::invalid_argument("predict_covariance: too many star points");
    const Matrix u = warp_points(warp, stars);
    detail::BasisEvaluator eval(sys.spec);
    std::vector<double> ut(sys.spec.dims());
    Matrix w(stars.rows(), sys.spec.count());
    for (std::size_t s = 0; s < stars.rows(); ++s) {
        for (std::size_t k = 0; k < ut.size(); ++k) ut[k] = u(k, s);
        eval.evaluate(ut);
        const auto ws = solve_triangular(sys.r, eval.values(), Transpose::yes);
        std::copy(ws.begin(), ws.end(), w.row(s).begin());
    }
    Matrix cov = matmul_nt(w, w);
    const double sigma2 = sys.hyp.sigma() * sys.hyp.sigma();
    simd::scale(sigma2, cov.data());
    return cov;
}

double nlml(const ReducedRankSystem& sys, std::span<const double> y) {
    check_system(sys, y);
    return detail::nlml_terms(sys.phi, sys.lambda, sys.hyp.sigma(), sys.r, y, false).value;
}

double loo_cv(const ReducedRankSystem& sys, std::span<const double> y) {
    check_system(sys, y);
    return detail::loo_terms(sys.phi, sys.lambda, sys.hyp.sigma(), sys.r, y, false).value;
}

std::vector<double> pack_parameters(const KernelHyperparameters& hyp, const Warp& warp) {
    std::vector<double> theta;
    theta.push_back(hyp.log_sigma_f);
    theta.insert(theta.end(), hyp.log_lengthscales.begin(), hyp.log_lengthscales.end());
    theta.push_back(hyp.log_sigma);
    if (const auto* net = std::get_if<WarpNetwork>(&warp)) {
        const auto p = net->parameters();
        theta.insert(theta.end(), p.begin(), p.end());
    }
    return theta;
}

void unpack_parameters(std::span<const double> theta, KernelHyperparameters& hyp, Warp& warp) {
    const std::size_t d = hyp.dims();
    if (theta.size() != d + 2 + warp_param_count(warp)) throw DimensionError("unpack_parameters: wrong length");
    hyp.log_sigma_f = theta[0];
    for (std::size_t k = 0; k < d; ++k) hyp.log_lengthscales[k] = theta[1 + k];
    hyp.log_sigma = theta[1 + d];
    if (auto* net = std::get_if<WarpNetwork>(&warp)) net->set_parameters(theta.subspan(d + 2));
}

LineGpProblem::LineGpProblem(std::vector<LineMeasurement> lines, std::vector<std::size_t> node_counts,
                             std::size_t m_tilde, double alpha)
    : lines_(std::move(lines)), node_counts_(std::move(node_counts)), sampling_(lines_, node_counts_),
      m_tilde_(m_tilde), alpha_(alpha) {
    if (m_tilde_ == 0) throw std::invalid_argument("LineGpProblem: m_tilde must be positive");
    y_.reserve(lines_.size());
    for (const auto& l : lines_) y_.push_back(l.value);
}

namespace {

std::vector<double> latent_extent(const Matrix& u) {
    std::vector<double> ext(u.rows(), 0.0);
    for (std::size_t k = 0; k < u.rows(); ++k)
        for (double v : u.row(k)) ext[k] = std::max(ext[k], std::abs(v));
    return ext;
}

} // namespace

BasisSpec LineGpProblem::basis_for(const Warp& warp, const KernelHyperparameters& hyp) const {
    const auto latent = detail::latent_at_nodes(warp, sampling_.points(), false);
    return {m_tilde_, select_domain(hyp, m_tilde_, alpha_, latent_extent(latent.u)).half_widths};
}

ReducedRankSystem LineGpProblem::assemble(const Warp& warp, const KernelHyperparameters& hyp) const {
    const auto latent = detail::latent_at_nodes(warp, sampling_.points(), false);
    ReducedRankSystem sys;
    sys.spec = {m_tilde_, select_domain(hyp, m_tilde_, alpha_, latent_extent(latent.u)).half_widths};
    sys.hyp = hyp;
    sys.phi = detail::build_phi(sampling_, latent.u, sys.spec, &sys.out_of_domain);
    sys.lambda = detail::spectral_diagonal(sys.spec, hyp);
    sys.r = qr_r_factor(detail::stacked_operand(sys.phi, sys.lambda, hyp.sigma()));
    return sys;
}

double LineGpProblem::cost(CostKind kind, const Warp& warp, const KernelHyperparameters& hyp) const {
    const auto sys = assemble(warp, hyp);
    return kind == CostKind::nlml ? nlml(sys, y_) : loo_cv(sys, y_);
}

} // namespace dklct
