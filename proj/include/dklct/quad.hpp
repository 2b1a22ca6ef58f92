#pragma once

// Composite Simpson integration along straight measurement lines.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dklct {

/// One observed line integral y = ∫_{-r}^{r} f(x0 + s·n̂) ds + noise.
struct LineMeasurement {
    std::vector<double> center;    ///< x0
    std::vector<double> direction; ///< n̂, unit length
    double half_length = 0.0;      ///< r
    double value = 0.0;            ///< y

    std::size_t dims() const noexcept { return center.size(); }
    /// Throws std::invalid_argument when ‖n̂‖ deviates from 1 by more than 1e-12 or r < 0.
    void validate() const;
    std::vector<double> point(double s) const;
};

/// Nodes s_q in [-r, r] and composite Simpson weights w_q.
struct SimpsonRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Throws std::invalid_argument unless n_nodes is odd and >= 3.
SimpsonRule simpson_rule(double half_length, std::size_t n_nodes);

/// Smallest odd n >= max(floor_nodes, ceil(20·2r / min_lengthscale)).
std::size_t default_node_count(double half_length, double min_lengthscale, std::size_t floor_nodes = 31);

using PointFunction = std::function<double(std::span<const double>)>;
using TwoPointKernel = std::function<double(std::span<const double>, std::span<const double>)>;

double simpson_line_integral(const PointFunction& g, const LineMeasurement& line, std::size_t n_nodes);

/// Nested Simpson approximation of ∫∫ k(x0_i + s n̂_i, x0_j + s' n̂_j) ds ds'.
/// Test-scale only: cost is n_nodes² kernel evaluations.
double double_line_integral_oracle(const TwoPointKernel& k, const LineMeasurement& line_i,
                                   const LineMeasurement& line_j, std::size_t n_nodes);

} // namespace dklct
