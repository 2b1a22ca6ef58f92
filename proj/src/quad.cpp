#include "dklct/quad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dklct {

void LineMeasurement::validate() const {
    if (direction.size() != center.size()) throw std::invalid_argument("LineMeasurement: dimension mismatch");
    double n2 = 0.0;
    for (double d : direction) n2 += d * d;
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) throw std::invalid_argument("LineMeasurement: direction is not unit length");
    if (!(half_length >= 0.0)) throw std::invalid_argument("LineMeasurement: negative half-length");
}

std::vector<double> LineMeasurement::point(double s) const {
    std::vector<double> x(center);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += s * direction[k];
    return x;
}

SimpsonRule simpson_rule(double half_length, std::size_t n_nodes) {
    if (n_nodes < 3 || n_nodes % 2 == 0) throw std::invalid_argument("simpson_rule: node count must be odd and >= 3");
    SimpsonRule rule;
    rule.nodes.resize(n_nodes);
    rule.weights.resize(n_nodes);
    const double h = 2.0 * half_length / static_cast<double>(n_nodes - 1);
    for (std::size_t q = 0; q < n_nodes; ++q) {
        // symmetric about 0 so odd integrands cancel exactly
        const double offset = static_cast<double>(q) - 0.5 * static_cast<double>(n_nodes - 1);
        rule.nodes[q] = offset * h;
        const double c = (q == 0 || q + 1 == n_nodes) ? 1.0 : (q % 2 == 1 ? 4.0 : 2.0);
        rule.weights[q] = c * h / 3.0;
    }
    return rule;
}

std::size_t default_node_count(double half_length, double min_lengthscale, std::size_t floor_nodes) {
    const double wanted = std::ceil(20.0 * 2.0 * half_length / min_lengthscale);
    std::size_t n = std::max<std::size_t>(floor_nodes, wanted > 0.0 ? static_cast<std::size_t>(wanted) : 0);
    if (n < 3) n = 3;
    if (n % 2 == 0) ++n;
    return n;
}

double simpson_line_integral(const PointFunction& g, const LineMeasurement& line, std::size_t n_nodes) {
    const SimpsonRule rule = simpson_rule(line.half_length, n_nodes);
    double acc = 0.0;
    for (std::size_t q = 0; q < n_nodes; ++q) acc += rule.weights[q] * g(line.point(rule.nodes[q]));
    return acc;
}

double double_line_integral_oracle(const TwoPointKernel& k, const LineMeasurement& line_i,
                                   const LineMeasurement& line_j, std::size_t n_nodes) {
    const SimpsonRule ri = simpson_rule(line_i.half_length, n_nodes);
    const SimpsonRule rj = simpson_rule(line_j.half_length, n_nodes);
    std::vector<std::vector<double>> pj;
    pj.reserve(n_nodes);
    for (double s : rj.nodes) pj.push_back(line_j.point(s));
    double acc = 0.0;
    for (std::size_t a = 0; a < n_nodes; ++a) {
        const auto xa = line_i.point(ri.nodes[a]);
        double inner = 0.0;
        for (std::size_t b = 0; b < n_nodes; ++b) inner += rj.weights[b] * k(xa, pj[b]);
        acc += ri.weights[a] * inner;
    }
    return acc;
}

} // namespace dklct
